"""Shared LTL corpus used by unit tests and the acceptance suite.

Includes each response clause of the bundled chemical-plant specification plus
a spread of small temporal patterns.  Words for the agreement checks are drawn
over the first three propositions of each formula.
"""

RESPONSE_CLAUSES = [
    ("rescue_response", "(tp || poi) -> <>(insp && <> res)"),
    ("rescue_hold", "(tp || poi) U (res && monitor)"),
    ("alkane_flame", "af -> <>(insp && <>(cut || cool) && <> ext)"),
    ("liquid_flame", "htlf -> (af U (insp && <>(cover || cool) && <> ext))"),
    ("voltage_flame", "hvf -> (insp && <>(cut && <> ext))"),
    ("sulfide_leak", "h2s -> (insp && <>(ignite || ads) && <> monitor)"),
    ("tank_damage", "tank -> (insp && <>(cool && <>(repair && monitor)))"),
]

BASIC_FORMULAS = [
    ("eventually", "<> p"),
    ("always", "[] p"),
    ("until", "p U q"),
    ("neg_until", "! (p U q)"),
    ("next", "X p"),
    ("response", "p -> <> q"),
    ("always_response", "[](p -> <> q)"),
    ("chain", "<>(a && <> b)"),
    ("recur", "[] <> p"),
    ("stabilize", "<> [] p"),
    ("guard_order", "(! b) U a"),
    ("nested_until", "p U (q U r)"),
    ("step_response", "[](p -> X q)"),
    ("both_goals", "<> p && <> q"),
    ("invariant_or", "[](p || q)"),
    ("never", "! <> p"),
    ("release_like", "! (p U q) || <> q"),
    ("handover", "(p && ! q) U q"),
    ("double_chain", "<>(a && <>(b && <> c))"),
    ("mixed", "([] p) || (q U p)"),
]

CORPUS = BASIC_FORMULAS + RESPONSE_CLAUSES

MONOLITH = """([] <> monitor)
&& []((((tp || poi) -> <>(insp && <> res)) && ((tp || poi) U (res && monitor))))
&& (af -> <>(insp && <>(cut || cool) && <> ext))
&& (htlf -> (af U (insp && <>(cover || cool) && <> ext)))
&& (hvf -> (insp && <>(cut && <> ext)))
&& (h2s -> (insp && <>(ignite || ads) && <> monitor))
&& (tank -> (insp && <>(cool && <>(repair && monitor))))"""
