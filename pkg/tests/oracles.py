"""Independent oracles the test suite checks the implementations against.

Each oracle is deliberately written as direct enumeration, separate from the
production code paths it validates: a top-down recursive-descent parser (vs
the bottom-up chart), exhaustive sums over latent labelings (vs closed
forms), central finite differences (vs analytic gradients), and a windowed
n-gram enumerator (vs the feature extractor).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from babble.grammar import Grammar, Lit, Sym
from babble.lf import Expr, integer, normalize, string, to_sexpr
from babble.parsing import Token


def sem_key(sem) -> tuple:
    if isinstance(sem, Expr):
        return ("E", to_sexpr(sem))
    if isinstance(sem, tuple):
        return ("t",) + tuple(sem_key(v) for v in sem)
    if sem is None:
        return ("n",)
    return (type(sem).__name__, str(sem))


# ---------------------------------------------------------------------------
# top-down recursive-descent parse enumeration
# ---------------------------------------------------------------------------


def brute_force_parse(
    grammar: Grammar, tokens: list[Token], max_skip: int | None = None
) -> dict[tuple[str, int, int], frozenset]:
    """All derivable (symbol, span) semantic values, by direct recursion."""
    n = len(tokens)
    cap_default = grammar.max_skip if max_skip is None else max_skip
    by_lhs: dict[str, list] = {}
    for rule in grammar.rules:
        by_lhs.setdefault(rule.lhs, []).append(rule)
    memo: dict[tuple[str, int, int], frozenset] = {}

    def derive(sym: str, i: int, j: int) -> frozenset:
        key = (sym, i, j)
        if key in memo:
            return memo[key]
        out = set()
        if j - i == 1:
            tok = tokens[i]
            if sym == "STR" and tok.quoted:
                out.add(string(tok.text))
            if sym == "INT" and not tok.quoted and tok.text.isdigit():
                out.add(integer(int(tok.text)))
        for rule in by_lhs.get(sym, []):
            if rule.kind == "unary":
                # unary applications are skip-free: the child covers the span
                name = rule.rhs[0].name
                for child in derive(name, i, j):
                    if rule.child_filter is not None and not rule.child_filter(0, child):
                        continue
                    try:
                        sem = rule.builder(child)
                    except Exception:
                        continue
                    sems = sem if isinstance(sem, list) else [sem]
                    for s in sems:
                        if s is None:
                            continue
                        if isinstance(s, Expr):
                            s = normalize(s)
                        out.add(s)
                continue
            cap = min(cap_default, j - i)
            layouts: list[tuple] = []

            def go(idx: int, pos: int, skips: int, acc: tuple) -> None:
                if skips > cap:
                    return
                if idx == len(rule.rhs):
                    if skips + (j - pos) <= cap:
                        layouts.append(acc)
                    return
                if pos >= j:
                    return
                go(idx, pos + 1, skips + 1, acc)
                item = rule.rhs[idx]
                if isinstance(item, Lit):
                    if not tokens[pos].quoted and tokens[pos].text == item.text:
                        go(idx + 1, pos + 1, skips, acc)
                else:
                    # remaining items each need at least one token, which also
                    # keeps same-span recursion out of first-symbol rules
                    hi = j - (len(rule.rhs) - idx - 1)
                    for p in range(pos + 1, hi + 1):
                        for child in derive(item.name, pos, p):
                            if rule.child_filter is not None and not rule.child_filter(idx, child):
                                continue
                            go(idx + 1, p, skips, acc + (child,))

            go(0, i, 0, ())
            for children in set(layouts):
                try:
                    sem = rule.builder(*children)
                except Exception:
                    continue
                sems = sem if isinstance(sem, list) else [sem]
                for s in sems:
                    if s is None:
                        continue
                    if isinstance(s, Expr):
                        s = normalize(s)
                    out.add(s)
        result = frozenset(out)
        memo[key] = result
        return result

    all_syms = {r.lhs for r in grammar.rules} | {"STR", "INT"}
    result = {}
    for length in range(1, n + 1):
        for i in range(0, n - length + 1):
            for sym in all_syms:
                result[(sym, i, i + length)] = derive(sym, i, i + length)
    return result


def random_grammar(rng) -> Grammar:
    """Small random grammar with an acyclic unary graph and structure-recording
    builders, for chart-vs-enumeration equivalence checks."""
    syms = ["S", "A", "B", "C", "D"][: rng.randint(2, 5)]
    vocab = ["a", "b", "c", "d", "e"][: rng.randint(2, 5)]
    rules = []
    rid = 0

    def builder_for(r):
        return lambda *kids: ("r%d" % r,) + kids

    n_rules = rng.randint(4, 30)
    while len(rules) < n_rules:
        kind_pick = rng.random()
        lhs = rng.choice(syms)
        if kind_pick < 0.4:
            rhs = tuple(Lit(rng.choice(vocab)) for _ in range(rng.randint(1, 2)))
        elif kind_pick < 0.55:
            later = [s for s in syms if syms.index(s) > syms.index(lhs)]
            if not later:
                continue
            rhs = (Sym(rng.choice(later)),)
        else:
            k = rng.randint(2, 4)
            items = []
            for _ in range(k):
                if rng.random() < 0.5:
                    items.append(Lit(rng.choice(vocab)))
                else:
                    items.append(Sym(rng.choice(syms)))
            if all(isinstance(x, Lit) for x in items) or (
                len(items) == 1 and isinstance(items[0], Sym)
            ):
                continue
            rhs = tuple(items)
        kind = "compositional"
        if all(isinstance(x, Lit) for x in rhs):
            kind = "lexical"
        elif len(rhs) == 1 and isinstance(rhs[0], Sym):
            kind = "unary"
        from babble.grammar import Rule

        rules.append(Rule(rid, lhs, rhs, builder_for(rid), kind))
        rid += 1
    return Grammar(rules=tuple(rules), aliases={}, max_skip=2, beam=100, start_symbol="S")


# ---------------------------------------------------------------------------
# exhaustive sums for the generative model
# ---------------------------------------------------------------------------


def _score(w_lab, w_acc, lam: np.ndarray, y: np.ndarray) -> float:
    s = 0.0
    m, n = lam.shape
    for i in range(m):
        for j in range(n):
            if lam[i, j] != 0:
                s += w_lab[i]
            if lam[i, j] == y[j]:
                s += w_acc[i]
    return s


def enum_log_marginal_likelihood(w_lab, w_acc, lam: np.ndarray) -> float:
    """log sum_Y p(lam, Y) by summing over every (lam', Y) state."""
    m, n = lam.shape
    num_terms = [
        _score(w_lab, w_acc, lam, np.array(y)) for y in itertools.product((-1, 1), repeat=n)
    ]
    z_terms = []
    for flat in itertools.product((-1, 0, 1), repeat=m * n):
        lam2 = np.array(flat, dtype=int).reshape(m, n)
        for y in itertools.product((-1, 1), repeat=n):
            z_terms.append(_score(w_lab, w_acc, lam2, np.array(y)))
    from scipy.special import logsumexp

    return float(logsumexp(num_terms) - logsumexp(z_terms))


def enum_marginals(w_lab, w_acc, lam: np.ndarray) -> np.ndarray:
    """p(y_j = +1 | lam) by summing the joint over every Y."""
    m, n = lam.shape
    weights = {}
    for y in itertools.product((-1, 1), repeat=n):
        weights[y] = math.exp(_score(w_lab, w_acc, lam, np.array(y)))
    total = sum(weights.values())
    p = np.zeros(n)
    for y, wgt in weights.items():
        for j in range(n):
            if y[j] == 1:
                p[j] += wgt
    return p / total


def fd_gradient(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    g = np.zeros_like(x, dtype=float)
    for k in range(x.size):
        up = x.copy()
        dn = x.copy()
        up[k] += eps
        dn[k] -= eps
        g[k] = (f(up) - f(dn)) / (2 * eps)
    return g


# ---------------------------------------------------------------------------
# feature-window enumeration
# ---------------------------------------------------------------------------


def enum_features(example) -> set[str]:
    lo = [t.lower() for t in example.tokens]
    first, second = sorted([example.span_x, example.span_y])

    def grams(seq, prefix):
        padded = ["<s>"] + list(seq) + ["</s>"]
        out = set()
        for size in (1, 2, 3):
            for i in range(len(padded) - size + 1):
                out.add(prefix + " ".join(padded[i : i + size]))
        return out

    feats = set()
    feats |= grams(lo[first[1] : second[0]], "between:")
    feats |= grams(lo[max(0, first[0] - 3) : first[0]], "left_x:")
    feats |= grams(lo[second[1] : second[1] + 3], "right_y:")
    feats |= grams(example.entity_tags[first[1] : second[0]], "tags:")
    feats |= {f"extra:{f}" for f in example.features}
    return feats


# ---------------------------------------------------------------------------
# tree utilities
# ---------------------------------------------------------------------------


def tree_diff_count(a: Expr, b: Expr) -> int:
    """Number of differing nodes between two same-shaped trees; a differing
    subtree shape counts as infinitely many (returns a big number)."""
    if len(a.args) != len(b.args):
        return 10_000
    here = 0 if (a.op == b.op and a.value == b.value) else 1
    return here + sum(tree_diff_count(x, y) for x, y in zip(a.args, b.args))
