#!/usr/bin/env python3
"""Regenerate src/sobol_direction_numbers.inc from the Joe-Kuo
new-joe-kuo-6.21201 table bundled with scipy.

Usage: gen_sobol_table.py [max_dims] > src/sobol_direction_numbers.inc
"""
import os
import sys

import numpy as np
import scipy.stats

MAX_DIMS = int(sys.argv[1]) if len(sys.argv) > 1 else 1024

path = os.path.join(os.path.dirname(scipy.stats.__file__),
                    "_sobol_direction_numbers.npz")
table = np.load(path)
poly = table["poly"][:MAX_DIMS]
vinit = table["vinit"][:MAX_DIMS]

print("// Generated by tools/gen_sobol_table.py from new-joe-kuo-6.21201.")
print("// Each row: {polynomial (with leading and trailing bits), {m_1..m_s}}.")
print("// Row 0 is the van der Corput dimension (all m_k = 1).")
print(f"// table-version: joe-kuo-6.21201/{MAX_DIMS}")
print()
for p, row in zip(poly, vinit):
    degree = max(int(p).bit_length() - 1, 1)
    ms = ", ".join(str(int(m)) for m in row[:degree])
    print(f"{{{int(p)}u, {{{ms}}}}},")
