"""A tour of the quantitative semantics on hand-built traces.

Run: python3 demos/robustness_tour.py
"""

import hyperq as hq

cfg = hq.RobustnessConfig()


def trace(*steps):
    labels = []
    for props, vals in steps:
        labels.append(hq.Label(frozenset(props), dict(vals)))
    return hq.Trace(tuple(labels))


# --- single-trace temporal operators --------------------------------------
f = hq.parse_formula("forall t1. F done@t1")
t = trace(({}, {}), ({}, {}), ({"done"}, {}))
sk = hq.skolemize(f)
print("F done on ..done      ->", hq.eval_hyper([t], sk, cfg))

t_never = trace(({}, {}), ({}, {}))
print("F done on never       ->", hq.eval_hyper([t_never], sk, cfg))

# numeric predicates score their margin, not just a truth value
g = hq.parse_formula("forall t1. G [ temp@t1 < 100 ]")
cool = trace(({}, {"temp": 60}), ({}, {"temp": 80}), ({}, {"temp": 95}))
hot = trace(({}, {"temp": 60}), ({}, {"temp": 130}))
print("G temp<100, margin 5  ->", hq.eval_hyper([cool], hq.skolemize(g), cfg))
print("G temp<100, violated  ->", hq.eval_hyper([hot], hq.skolemize(g), cfg))

# --- two traces and quantifier alternation ---------------------------------
# for each run of the first component there exists a run of the second that
# answers every request: the witness-tagged atoms read the second slot
pair = hq.parse_formula("forall t1. exists t2. G (req@t1 -> F ack@t2)")
sk = hq.skolemize(pair)
print("witness form          ->", [(d.exist_index, d.deps) for d in sk.decls])

requests = trace(({"req"}, {}), ({}, {}), ({"req"}, {}), ({}, {}))
answers = trace(({}, {}), ({"ack"}, {}), ({}, {}), ({"ack"}, {}))
silent = trace(({}, {}), ({}, {}), ({}, {}), ({}, {}))
print("responsive partner    ->", hq.eval_hyper([requests, answers], sk, cfg))
print("silent partner        ->", hq.eval_hyper([requests, silent], sk, cfg))

# --- the boolean reference oracle ------------------------------------------
# explicit enumeration over a finite trace set; the robustness sign agrees
T = [requests, answers, silent]
print("set satisfies         ->", hq.boolean_sat(T, pair))
verdict = hq.sat_verdict(hq.eval_hyper([requests, answers], sk, cfg), cfg)
print("verdict of best pair  ->", verdict.value)
