"""Reproducible counterexample and regression suites: concrete families
of interpretations with their published values, evaluated exactly."""

from __future__ import annotations

from fractions import Fraction

from . import formula as F
from .formula import (
    And, Or, Exists, Forall, PosAtom, NegAtom, Eq, Neq, ScatteredExists,
    ScatteredForall, BallForall, Signature, parse,
)
from .semiring import builtin, make_minmax_chain
from .semantics import Interpretation, evaluate
from .gaifman import gnf, check_negation_preservation
from .hanf import hanf_rt_equivalent
from . import oracle as O

SIG_U = Signature({"U": 1})
SIG_E = Signature({"E": 2})


def _check(checks: list, description: str, expected, actual, provenance: str):
    checks.append(O.SuiteCheck(description, str(expected), str(actual),
                               provenance, str(expected) == str(actual)))


def unary_all_ones(n: int, spec, one) -> Interpretation:
    universe = [f"a{i}" for i in range(1, n + 1)]
    return Interpretation(universe, SIG_U, spec, {("U", (e,)): one for e in universe})


def suite_hanf_counterexample() -> O.SuiteReport:
    """Counting breaks Hanf's theorem over the natural semiring: the
    census condition holds between the all-ones unary models while the
    value of E x . U(x) keeps growing."""
    checks: list = []
    nat = builtin("natural")
    psi = parse("E x . U(x)", SIG_U)
    for n in range(1, 9):
        pi = unary_all_ones(n, nat, 1)
        _check(checks, f"natural pi_{n} [[E x . U(x)]]", n, evaluate(pi, psi), "paper value")
    t = 3
    pit = unary_all_ones(t, nat, 1)
    for n in range(t, 8):
        pin = unary_all_ones(n, nat, 1)
        for r in (0, 1, 2):
            _check(checks, f"pi_{n} ~rt~ pi_{t} (r={r}, t={t})", True,
                   hanf_rt_equivalent(pin, pit, r, t), "census threshold")
        _check(checks, f"values differ for n={n} vs t={t}", n != t,
               evaluate(pin, psi) != evaluate(pit, psi), "counting")
    return O.SuiteReport("hanf-counterexample", checks)


def interpretation_st(s: int, t: int, spec) -> Interpretation:
    return Interpretation(["a", "b"], SIG_U, spec, {("U", ("a",)): s, ("U", ("b",)): t})


def formula_51_psi() -> F.Formula:
    return parse("E y . (U(y) & y != x)", SIG_U)


def formula_51_classical() -> F.Formula:
    """The classical Gaifman normal form of E y (U(y) & y != x); over two
    elements it evaluates to the product s*t instead of t."""
    return ScatteredExists(
        ("y", "z"), 0,
        Or((And((PosAtom("U", ("y",)), PosAtom("U", ("z",)))),
            And((NegAtom("U", ("x",)), Exists("w", PosAtom("U", ("w",))))))),
    )


def suite_sec51() -> O.SuiteReport:
    checks: list = []
    chain3 = make_minmax_chain(3)
    psi, phi = formula_51_psi(), formula_51_classical()
    pi = interpretation_st(1, 2, chain3)
    _check(checks, "chain-3 pi_st [[psi(a)]] (s=1, t=2)", 2,
           evaluate(pi, psi, {"x": "a"}), "paper value t")
    _check(checks, "chain-3 pi_st [[phi(a)]] (s=1, t=2)", 1,
           evaluate(pi, phi, {"x": "a"}), "paper value s*t = min(s,t)")
    chain4 = make_minmax_chain(4)
    for s in range(1, 4):
        for t in range(1, 4):
            if s == t:
                continue
            pi4 = interpretation_st(s, t, chain4)
            _check(checks, f"chain-4 psi(a) = t for (s,t)=({s},{t})", t,
                   evaluate(pi4, psi, {"x": "a"}), "monotone family")
            _check(checks, f"chain-4 phi(a) = min(s,t) for (s,t)=({s},{t})", min(s, t),
                   evaluate(pi4, phi, {"x": "a"}), "monotone family")
    return O.SuiteReport("sec5.1", checks)


def suite_sec52() -> O.SuiteReport:
    checks: list = []
    trop = builtin("tropical")
    psi = parse("E z . A x . E y . (U(y) | x = z)", SIG_U)
    for n in range(1, 7):
        pi = unary_all_ones(n, trop, Fraction(1))
        _check(checks, f"tropical pi_{n} [[psi]]", Fraction(n - 1),
               evaluate(pi, psi), "paper value n-1")
    # basic local sentence values, m = 2 and c_phi = 1
    phi_x1 = PosAtom("U", ("x1",))
    phi_x2 = PosAtom("U", ("x2",))
    esc = ScatteredExists(("x1", "x2"), 0, And((phi_x1, phi_x2)))
    asc = ScatteredForall(("x1", "x2"), 0, Or((phi_x1, phi_x2)))
    for n in range(3, 6):
        pi = unary_all_ones(n, trop, Fraction(1))
        _check(checks, f"tropical pi_{n} existential basic local (m=2)",
               Fraction(2), evaluate(pi, esc), "paper value m*c")
        _check(checks, f"tropical pi_{n} universal basic local (m=2)",
               Fraction(n * (n - 1)), evaluate(pi, asc), "paper value n(n-1)c")
    return O.SuiteReport("sec5.2", checks)


def example_72_sentence() -> F.Formula:
    return parse("E x . A y . E(x,y)", SIG_E)


def example_72_local_form() -> F.Formula:
    return parse("Asc [1] x1 x2 . false & E x . A y in B[2](x) . E(x,y)", SIG_E)


def suite_example72() -> O.SuiteReport:
    checks: list = []
    psi = example_72_sentence()
    golden = example_72_local_form()
    bounds = O.EnumerationBounds(
        max_universe=3, semirings=(make_minmax_chain(2), make_minmax_chain(3)))
    verdict = O.check_equivalence(psi, golden, [], bounds)
    _check(checks, "E x A y E(x,y) vs its published local sentence",
           "Equivalent within bounds", verdict.describe().split(";")[0], "golden equivalence")
    out = gnf(psi)
    verdict2 = O.check_equivalence(out, golden, [], bounds)
    _check(checks, "pipeline output vs published local sentence",
           "Equivalent within bounds", verdict2.describe().split(";")[0], "pipeline")
    return O.SuiteReport("example7.2", checks)


def suite_example75() -> O.SuiteReport:
    """The classical normal form of E y (U(y) & y != x) necessarily adds a
    negation: U occurs only positively in the input but negatively in it."""
    checks: list = []
    psi, phi = formula_51_psi(), formula_51_classical()
    _check(checks, "negation preservation fails for the classical form",
           False, check_negation_preservation(psi, phi), "added ~U(x)")
    _check(checks, "U flips to both polarities", "both",
           F.polarity(phi).of("U"), "witness relation")
    bounds = O.EnumerationBounds(max_universe=3, semirings=(builtin("boolean"),))
    _check(checks, "classical form is Boolean-equivalent",
           "Equivalent within bounds",
           O.check_equivalence(psi, phi, ["x"], bounds).describe(), "boolean check")
    chain_bounds = O.EnumerationBounds(max_universe=3, semirings=(make_minmax_chain(3),))
    _check(checks, "classical form fails over chain-3", False,
           bool(O.check_equivalence(psi, phi, ["x"], chain_bounds)), "min-max failure")
    return O.SuiteReport("example7.5", checks)


def appendix_interpretations(n: int, s: int, t: int, spec, drop_edge: bool) -> Interpretation:
    universe = ["v", "w"] + [f"v{i}" for i in range(1, n + 1)]
    sig = Signature({"U": 1, "E": 2})
    values = {("U", (a,)): t for a in universe}
    for a in universe:
        for b in universe:
            values[("E", (a, b))] = s
    if drop_edge:
        values[("E", ("v", "w"))] = spec.zero
    return Interpretation(universe, sig, spec, values)


def fo_dist_leq(x: str, y: str, r: int) -> F.Formula:
    """Distance formula in plain first-order logic over graphs, as used in
    Boolean semantics: d(x,y) <= 0 is x=y, and each extra step allows one
    edge in either direction."""
    if r == 0:
        return Eq(x, y)
    z = F.fresh_var("_d")
    step = Or((PosAtom("E", (x, z)), PosAtom("E", (z, x))))
    return Or((Eq(x, y), Exists(z, And((step, fo_dist_leq(z, y, r - 1))))))


def fo_dist_gt(x: str, y: str, r: int) -> F.Formula:
    if r == 0:
        return Neq(x, y)
    z = F.fresh_var("_d")
    step = And((NegAtom("E", (x, z)), NegAtom("E", (z, x))))
    return And((Neq(x, y), Forall(z, Or((step, fo_dist_gt(z, y, r - 1))))))


def suite_appendix_a() -> O.SuiteReport:
    checks: list = []
    chain3 = make_minmax_chain(3)
    s, t = 1, 2
    beta = parse("E x . E y . (U(x) & ~E(x,y))", Signature({"U": 1, "E": 2}))
    for n in range(2, 6):
        pi = appendix_interpretations(n, s, t, chain3, drop_edge=False)
        pi_prime = appendix_interpretations(n, s, t, chain3, drop_edge=True)
        _check(checks, f"pi_{n} [[beta]]", 0, evaluate(pi, beta), "paper value 0")
        _check(checks, f"pi'_{n} [[beta]]", t, evaluate(pi_prime, beta), "paper value t")
    pi2 = appendix_interpretations(2, s, t, chain3, drop_edge=False)
    pi2p = appendix_interpretations(2, s, t, chain3, drop_edge=True)
    for r in (1, 2):
        for pi, name in ((pi2, "pi"), (pi2p, "pi'")):
            _check(checks, f"{name} [[d(v,v) <= {r}]]", chain3.one,
                   evaluate(pi, fo_dist_leq("x", "y", r), {"x": "v", "y": "v"}),
                   "distance value 1")
            _check(checks, f"{name} [[d(v,w) <= {r}]]", s,
                   evaluate(pi, fo_dist_leq("x", "y", r), {"x": "v", "y": "w"}),
                   "distance value s")
            _check(checks, f"{name} [[d(v,w) > {r}]]", 0,
                   evaluate(pi, fo_dist_gt("x", "y", r), {"x": "v", "y": "w"}),
                   "distance value 0")
    return O.SuiteReport("appendixA", checks)


def corpus() -> list:
    """The Gaifman acceptance corpus: sentences spanning the quantifier
    patterns E, A, EE, EA, AE, EAE over unary and binary signatures."""
    sig_u, sig_e = SIG_U, SIG_E
    sig_ue = Signature({"U": 1, "E": 2})
    return [
        parse("E x . U(x)", sig_u),
        parse("A x . U(x)", sig_u),
        parse("E x . E y . (U(x) & U(y) & x != y)", sig_u),
        parse("E x . A y . (U(x) | U(y))", sig_u),
        parse("A x . E y . (U(y) & y != x)", sig_u),
        parse("E x . A y . E(x,y)", sig_e),
        parse("A x . E y . E(x,y)", sig_e),
        parse("E x . E y . E(x,y)", sig_e),
        parse("A x . E(x,x)", sig_e),
        parse("E x . (U(x) & A y . (E(x,y) | U(y)))", sig_ue),
        parse("A x . (U(x) | E y . E(x,y))", sig_ue),
        parse("E z . A x . E y . (U(y) | x = z)", sig_u),
        parse("E x . A y . E z . (E(x,y) | E(y,z))", sig_e),
        parse("E x . A y . E z . ((E(x,y) | U(z)) & E(z,y))", sig_ue),
    ]


def suite_negation_cor71() -> O.SuiteReport:
    checks: list = []
    for psi in corpus():
        out = gnf(psi)
        _check(checks, f"polarities preserved for {F.render(psi)}", True,
               check_negation_preservation(psi, out), "no added negations")
    return O.SuiteReport("negation-cor71", checks)


REGISTRY = {
    "hanf-counterexample": suite_hanf_counterexample,
    "sec5.1": suite_sec51,
    "sec5.2": suite_sec52,
    "example7.2": suite_example72,
    "example7.5": suite_example75,
    "appendixA": suite_appendix_a,
    "negation-cor71": suite_negation_cor71,
}
