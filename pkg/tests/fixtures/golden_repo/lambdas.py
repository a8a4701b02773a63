def apply_all(items):
    return list(map(lambda s: s.strip(), items))
