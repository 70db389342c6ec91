"""Reference frequent itemsets and rules for demo.dat by exhaustive counting.

Usage: python3 gen_demo_oracle.py demo.dat 0.4 0.6 > demo_oracle.json
"""
import itertools
import json
import math
import sys
from fractions import Fraction


def main():
    path, minsup, minconf = sys.argv[1], Fraction(sys.argv[2]), Fraction(sys.argv[3])
    rows = [frozenset(int(t) for t in line.split()) for line in open(path) if line.strip()]
    items = sorted(set().union(*rows))
    total = len(rows)
    threshold = math.ceil(minsup * total)
    counts = {}
    for k in range(1, len(items) + 1):
        for combo in itertools.combinations(items, k):
            c = sum(1 for r in rows if r.issuperset(combo))
            if c >= threshold:
                counts[combo] = c
    rules = []
    for z in sorted(counts, key=lambda s: (len(s), s)):
        if len(z) < 2:
            continue
        local = []
        for k in range(1, len(z)):
            for x in itertools.combinations(z, k):
                if Fraction(counts[z], counts[x]) >= minconf:
                    y = tuple(i for i in z if i not in x)
                    local.append((x, y))
        for x, y in sorted(local):
            rules.append({
                "antecedent": list(x),
                "consequent": list(y),
                "support_count": counts[z],
                "antecedent_count": counts[x],
            })
    out = {
        "minsup": str(minsup),
        "minconf": str(minconf),
        "total_transactions": total,
        "frequent_itemsets": [
            {"itemset": list(s), "count": c} for s, c in sorted(counts.items(), key=lambda e: (len(e[0]), e[0]))
        ],
        "rules": rules,
    }
    json.dump(out, sys.stdout, indent=2)
    print()


main()
