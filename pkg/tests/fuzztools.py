"""Random AST generation shared by the parser round-trip suites."""

import random

from tblsim import CircuitAst, Quantity, Statement

LETTERS = "abcdefghijklmnopqrstuvwxyz"


def ident(rng, prefix=""):
    return (prefix or rng.choice(LETTERS)) + "".join(
        rng.choice(LETTERS + "0123456789_") for _ in range(rng.randint(0, 6))
    )


def quantity(rng, dimension):
    if dimension == "pressure":
        q = Quantity(round(rng.uniform(0.0, 200.0), rng.randint(0, 4)), "kPa")
    elif dimension == "length":
        if rng.random() < 0.5:
            q = Quantity(round(rng.uniform(1.0, 60.0), rng.randint(0, 4)), "cm")
        else:
            q = Quantity(round(rng.uniform(0.05, 9.99), rng.randint(0, 4)), "mm")
    elif dimension == "volume":
        q = Quantity(round(rng.uniform(0.1, 10.0), rng.randint(0, 4)), "mL")
    else:  # raw SI
        q = Quantity(float(f"{rng.uniform(1e-12, 1e-3):.3e}"), "")
    return q.canonical()


def statement(rng, i):
    roll = rng.random()
    if roll < 0.15:
        return Statement("source", f"S{i}", {"pressure": quantity(rng, "pressure")})
    if roll < 0.45:
        params = {
            "from": ident(rng),
            "to": ident(rng),
            "length": quantity(rng, "length"),
        }
        if rng.random() < 0.4:
            params["id"] = quantity(rng, "length")
        return Statement("tube", f"t{i}", params)
    if roll < 0.6:
        params = {"node": ident(rng)}
        if rng.random() < 0.5:
            params["compliance"] = quantity(rng, "raw")
        if rng.random() < 0.3:
            params["init"] = quantity(rng, "pressure")
        return Statement("balloon", f"b{i}", params)
    if roll < 0.75:
        params = {
            "from": ident(rng),
            "to": ident(rng),
            "control": ident(rng),
            "state": rng.choice(["open", "closed"]),
        }
        if rng.random() < 0.4:
            params["inflate"] = quantity(rng, "pressure")
        return Statement("valve", f"v{i}", params)
    if roll < 0.85:
        gt = rng.choice(["NOT", "NOR", "NAND", "AND", "OR"])
        ins = (ident(rng),) if gt == "NOT" else (ident(rng), ident(rng))
        return Statement(
            "gate",
            f"g{i}",
            {"in": ins, "out": ident(rng), "supply": "SUP"},
            gate_type=gt,
        )
    if roll < 0.95:
        params = {"n": rng.choice([3, 5, 7, 9]), "supply": "SUP"}
        if rng.random() < 0.3:
            params["pulldown"] = rng.choice(["per-gate", "central"])
        return Statement("ring", f"r{i}", params)
    return Statement("probe", ident(rng, f"p{i}_"), {})


def random_ast(rng: random.Random) -> CircuitAst:
    return CircuitAst(tuple(statement(rng, i) for i in range(rng.randint(1, 8))))
