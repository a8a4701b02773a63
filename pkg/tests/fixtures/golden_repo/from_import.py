from json import dumps as jd


def serialize(obj):
    return jd(obj)
