import math


def outer(x):
    def inner(y):
        return math.sqrt(y)

    return inner(x)
