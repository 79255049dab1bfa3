"""Brute-force ERGM statistics straight from the degree and shared-partner counts."""
import math

import numpy as np

A_DECAY = 0.25


def brute_stats(A, grade):
    n = len(A)
    deg = [sum(A[i]) for i in range(n)]
    s = [0.0] * 9
    s[0] = float(sum(deg))
    for i in range(n):
        for j in range(i + 1, n):
            if A[i][j] and grade[i] == grade[j] and 7 <= grade[i] <= 12:
                s[1 + grade[i] - 7] += 1
    r = 1 - math.exp(-A_DECAY)
    D = [0] * (n + 1)
    for d in deg:
        D[d] += 1
    s[7] = math.exp(A_DECAY) * sum((1 - r**k) * D[k] for k in range(1, n))
    esp = [0] * (n + 1)
    for i in range(n):
        for j in range(i + 1, n):
            if A[i][j]:
                esp[sum(1 for k in range(n) if A[i][k] and A[j][k])] += 1
    s[8] = math.exp(A_DECAY) * sum((1 - r**k) * esp[k] for k in range(1, n - 1))
    return np.array(s)


def graph_from_code(code, n):
    A = np.zeros((n, n), dtype=np.int64)
    iu, ju = np.triu_indices(n, 1)
    bits = (code >> np.arange(iu.size)) & 1
    A[iu, ju] = bits
    A[ju, iu] = bits
    return A


def brute_counts(A, grade):
    """(degree sum, same-grade edge counts, degree histogram, shared-partner histogram) by plain loops."""
    n = len(A)
    deg = [sum(A[i]) for i in range(n)]
    homo = [0] * 6
    D = [0] * n
    esp = [0] * max(n - 1, 1)
    for d in deg:
        D[d] += 1
    for i in range(n):
        for j in range(i + 1, n):
            if A[i][j]:
                if grade[i] == grade[j] and 7 <= grade[i] <= 12:
                    homo[grade[i] - 7] += 1
                esp[sum(1 for k in range(n) if A[i][k] and A[j][k])] += 1
    return sum(deg), homo, D, esp
