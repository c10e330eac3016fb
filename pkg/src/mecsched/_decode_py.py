"""Pure-Python chromosome decoder, used when the compiled extension is unavailable.

Must stay bit-for-bit equivalent to ``_decode.pyx``: same sequencing rules and
the same floating-point operation order in the fitness sum.

Tasks are indexed by position in (arrival, id) order. Gene layout: ``n * bits``
CPU-code bits (MSB first, 0 = drop, codes above ``m`` also drop) followed by a
single sequencing gene (0 = arrival order, 1 = shortest first).
"""

import numpy as np


def _codes(genes, n, m, bits):
    codes = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        codes = (codes << 1) | genes[b:n * bits:bits].astype(np.int64)
    codes[codes > m] = 0
    return codes


def _sequence_cpu(idx, rule, arrival, proc, deadline, cpu_id, cpu_out, start_out):
    if rule == 0:
        now = None
        for k in idx:
            s = arrival[k] if now is None or now < arrival[k] else now
            if s + proc[k] <= deadline[k]:
                cpu_out[k] = cpu_id
                start_out[k] = s
                now = s + proc[k]
        return

    pool = []
    ptr = 0
    now = None
    while True:
        if not pool:
            if ptr >= len(idx):
                break
            if now is None or now < arrival[idx[ptr]]:
                now = arrival[idx[ptr]]
        while ptr < len(idx) and arrival[idx[ptr]] <= now:
            pool.append(idx[ptr])
            ptr += 1
        pool = [k for k in pool if deadline[k] - proc[k] >= now]
        if not pool:
            continue
        k = min(pool, key=lambda q: (proc[q], arrival[q], q))
        pool.remove(k)
        cpu_out[k] = cpu_id
        start_out[k] = now
        now += proc[k]


def _decode(genes, arrival, proc, deadline, m, bits):
    n = len(arrival)
    codes = _codes(genes, n, m, bits).tolist()
    rule = int(genes[n * bits])
    cpu_out = [0] * n
    start_out = [0] * n
    for j in range(1, m + 1):
        idx = [k for k in range(n) if codes[k] == j]
        if idx:
            _sequence_cpu(idx, rule, arrival, proc, deadline, j, cpu_out, start_out)
    return cpu_out, start_out


def decode_one(genes, arrival, proc, deadline, m, bits):
    """Return ``(cpu, start)`` arrays; ``cpu[k] == 0`` marks a dropped task."""
    cpu, start = _decode(np.asarray(genes, dtype=np.uint8), [int(v) for v in arrival],
                         [int(v) for v in proc], [int(v) for v in deadline], m, bits)
    return np.array(cpu, dtype=np.int64), np.array(start, dtype=np.int64)


def _fitness(cpu, start, arrival, slack, lam, n):
    total = 0.0
    dropped = 0
    for k in range(n):
        if cpu[k] == 0:
            dropped += 1
        elif slack[k] > 0:
            total += float(start[k] - arrival[k]) / float(slack[k])
    return lam * total + (1.0 - lam) * dropped / n


def evaluate_population(pop, arrival, proc, deadline, m, bits, lam):
    """Objective value of every chromosome (row) in ``pop``."""
    n = len(arrival)
    arr = [int(v) for v in arrival]
    prc = [int(v) for v in proc]
    dl = [int(v) for v in deadline]
    slack = [d - a - p for a, p, d in zip(arr, prc, dl)]
    pop = np.asarray(pop, dtype=np.uint8)
    out = np.empty(len(pop), dtype=np.float64)
    for r in range(len(pop)):
        cpu, start = _decode(pop[r], arr, prc, dl, m, bits)
        out[r] = _fitness(cpu, start, arr, slack, float(lam), n)
    return out
