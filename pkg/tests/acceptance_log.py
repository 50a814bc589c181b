"""Collects one verdict line per acceptance criterion for the terminal summary."""

LINES = []


def record(n, ok, detail):
    line = f"AC{n} {'PASS' if ok else 'FAIL'}: {detail}"
    LINES.append(line)
    print(line)
    return ok
