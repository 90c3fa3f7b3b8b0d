#!/usr/bin/env python3
"""Independent numpy/scipy reference values for the unit tests.

Writes tests/data/fixture_mdp.json and tests/data/oracles.json.
"""
import itertools
import json
import pathlib

import numpy as np
from scipy.optimize import linprog

OUT = pathlib.Path(__file__).resolve().parent.parent / "data"


def synthetic3_tensor():
    # P[s1,s2,s3,a1,a2,a3,t1,t2,t3], R[s1,s2,s3,a1,a2,a3]
    P = np.zeros((2,) * 9)
    R = np.zeros((2,) * 6)
    for s1, s2, s3, a1, a2, a3 in itertools.product(range(2), repeat=6):
        if s1 == s2:
            n = s1 if a1 == a2 else 1 - s1
            n1 = n2 = n
        else:
            n1 = n2 = 0
        p3 = [0.0, 1.0] if (s3 == 0 and a2 != a3) else [0.5, 0.5]
        for t3 in range(2):
            P[s1, s2, s3, a1, a2, a3, n1, n2, t3] = p3[t3]
        # one unit per agent whose state is unchanged, in expectation
        R[s1, s2, s3, a1, a2, a3] = (n1 == s1) + (n2 == s2) + p3[s3]
    return P, R


def flatten(P, R):
    P = P.reshape(8, 8, 8)  # s, a, t with agent 1 most significant
    R = R.reshape(8, 8)
    return P, R


def value_iteration(P, R, gamma, tol=1e-13):
    q = np.zeros_like(R)
    while True:
        nq = R + gamma * P @ q.max(axis=1)
        if np.abs(nq - q).max() < tol:
            return nq
        q = nq


def policy_q(P, R, gamma, pi):
    S, A = R.shape
    M = np.eye(S * A) - gamma * np.einsum("sat,tb->satb", P, pi).reshape(S * A, S * A)
    return np.linalg.solve(M, R.reshape(-1)).reshape(S, A)


def stationary_pairs(P, pi, support=None):
    S, A = pi.shape
    Ps = np.einsum("sa,sat->st", pi, P)
    idx = np.arange(S) if support is None else np.array(support)
    sub = Ps[np.ix_(idx, idx)]
    w, v = np.linalg.eig(sub.T)
    k = np.argmin(np.abs(w - 1))
    mu = np.zeros(S)
    mu[idx] = np.real(v[:, k]) / np.real(v[:, k]).sum()
    return mu[:, None] * pi


def average_reward(P, R, pi, starts):
    S = R.shape[0]
    Ps = np.einsum("sa,sat->st", pi, P)
    r = (pi * R).sum(axis=1)
    mu = np.zeros(S)
    mu[starts] = 1.0 / len(starts)
    L = mu
    acc = 0.0
    # Cesaro average of the state law converges; the chains here are aperiodic.
    for _ in range(20000):
        L = L @ Ps
    return float(L @ r)


def group_tensor(P, groups):
    """Kernel of the grouped view as G[s_g1, s_g2, a_g1, a_g2, t_g1, t_g2]."""
    order = [j for g in groups for j in g]
    Pp = P.transpose(order + [3 + j for j in order] + [6 + j for j in order])
    sizes = [2 ** len(g) for g in groups]
    return Pp.reshape(sizes + sizes + sizes)


def best_row(target, others):
    """min over p in simplex of max_k 0.5*|target_k - p (x) others_k|_1.

    target: list of arrays (T1, T2); others: list of arrays (T2,).
    """
    T1, T2 = target[0].shape
    n = T1 + 1 + len(target) * T1 * T2  # p, z, u
    c = np.zeros(n)
    c[T1] = 1.0
    A, b = [], []
    for k, (tg, q) in enumerate(zip(target, others)):
        base = T1 + 1 + k * T1 * T2
        for t1 in range(T1):
            for t2 in range(T2):
                u = base + t1 * T2 + t2
                row = np.zeros(n); row[t1] = -q[t2]; row[u] = -1.0
                A.append(row); b.append(-tg[t1, t2])
                row = np.zeros(n); row[t1] = q[t2]; row[u] = -1.0
                A.append(row); b.append(tg[t1, t2])
        row = np.zeros(n); row[base:base + T1 * T2] = 0.5; row[T1] = -1.0
        A.append(row); b.append(0.0)
    Aeq = np.zeros((1, n)); Aeq[0, :T1] = 1.0
    bounds = [(0, 1)] * T1 + [(0, None)] * (n - T1)
    res = linprog(c, A_ub=np.array(A), b_ub=np.array(b), A_eq=Aeq, b_eq=[1.0], bounds=bounds, method="highs")
    return res.x[:T1], res.fun


def dependence_level(G, starts=8, passes=8, seed=0):
    S1, S2, A1, A2 = G.shape[:4]
    rng = np.random.default_rng(seed)

    def gap(k1, k2):
        worst = 0.0
        for s1, s2, a1, a2 in itertools.product(range(S1), range(S2), range(A1), range(A2)):
            pr = np.outer(k1[a1, s1], k2[a2, s2])
            worst = max(worst, 0.5 * np.abs(G[s1, s2, a1, a2] - pr).sum())
        return worst

    best = np.inf
    for st in range(starts):
        k1 = rng.dirichlet(np.ones(S1), size=(A1, S1))
        k2 = rng.dirichlet(np.ones(S2), size=(A2, S2))
        if st == 0:
            k1[:] = 1.0 / S1
            k2[:] = 1.0 / S2
        for _ in range(passes):
            for a1, s1 in itertools.product(range(A1), range(S1)):
                tg = [G[s1, s2, a1, a2] for s2 in range(S2) for a2 in range(A2)]
                ot = [k2[a2, s2] for s2 in range(S2) for a2 in range(A2)]
                k1[a1, s1], _ = best_row(tg, ot)
            for a2, s2 in itertools.product(range(A2), range(S2)):
                tg = [G[s1, s2, a1, a2].T for s1 in range(S1) for a1 in range(A1)]
                ot = [k1[a1, s1] for s1 in range(S1) for a1 in range(A1)]
                k2[a2, s2], _ = best_row(tg, ot)
        best = min(best, gap(k1, k2))
    return best


def fixture():
    rng = np.random.default_rng(2024)
    ss, aa = [2, 3], [2, 2]
    S, A = 6, 4
    P = rng.dirichlet(np.ones(S) * 0.7, size=(A, S))  # [a][s][t]
    P = np.round(P, 6)
    P[..., -1] = 1.0 - P[..., :-1].sum(axis=-1)
    rewards = [np.round(rng.uniform(size=(ss[i], aa[i])), 4) for i in range(2)]
    gamma = 0.9
    spec = {
        "n": 2,
        "local_state_sizes": ss,
        "local_action_sizes": aa,
        "gamma": gamma,
        "rewards": [r.tolist() for r in rewards],
        "transition": P.tolist(),
    }
    return spec, P.transpose(1, 0, 2), rewards


def joint_reward(rewards, ss, aa, agent=None):
    S, A = int(np.prod(ss)), int(np.prod(aa))
    R = np.zeros((S, A))
    for s in range(S):
        sl = np.unravel_index(s, ss)
        for a in range(A):
            al = np.unravel_index(a, aa)
            terms = [rewards[i][sl[i], al[i]] for i in range(len(ss))]
            R[s, a] = sum(terms) if agent is None else terms[agent]
    return R


def product_policy(locals_, ss, aa):
    S, A = int(np.prod(ss)), int(np.prod(aa))
    pi = np.zeros((S, A))
    for s in range(S):
        sl = np.unravel_index(s, ss)
        for a in range(A):
            al = np.unravel_index(a, aa)
            pi[s, a] = np.prod([locals_[i][sl[i], al[i]] for i in range(len(ss))])
    return pi


def aggregated(P, Ri, gamma, d, ss, aa, agent, pi=None, tol=1e-14):
    S, A = Ri.shape
    si = np.array([np.unravel_index(s, ss)[agent] for s in range(S)])
    ai = np.array([np.unravel_index(a, aa)[agent] for a in range(A)])
    x = np.zeros((ss[agent], aa[agent]))
    while True:
        q = x[si][:, ai]
        v = q.max(axis=1) if pi is None else (pi * q).sum(axis=1)
        f = Ri + gamma * P @ v
        num = np.zeros_like(x); den = np.zeros_like(x)
        np.add.at(num, (si[:, None], ai[None, :]), d * f)
        np.add.at(den, (si[:, None], ai[None, :]), d)
        nx = num / den
        if np.abs(nx - x).max() < tol:
            return nx
        x = nx


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    oracles = {}

    P9, R6 = synthetic3_tensor()
    P, R = flatten(P9, R6)
    q = value_iteration(P, R, 0.99)
    oracles["synthetic3_qstar"] = q.tolist()
    greedy = np.zeros_like(q)
    greedy[np.arange(8), q.argmax(axis=1)] = 1.0
    oracles["synthetic3_optimal_average_reward"] = average_reward(P, R, greedy, [0, 1, 6, 7])
    uni = np.full((8, 8), 1.0 / 8)
    oracles["synthetic3_uniform_stationary"] = stationary_pairs(P, uni, support=[0, 1, 6, 7]).tolist()
    dep = {}
    for name, groups in {"12": [[0, 1], [2]], "23": [[0], [1, 2]], "13": [[0, 2], [1]]}.items():
        dep[name] = dependence_level(group_tensor(P9, groups))
    oracles["synthetic3_dependence"] = dep

    spec, Pf, rewards = fixture()
    ss, aa, gamma = spec["local_state_sizes"], spec["local_action_sizes"], spec["gamma"]
    Rf = joint_reward(rewards, ss, aa)
    qf = value_iteration(Pf, Rf, gamma, 1e-14)
    oracles["fixture_qstar"] = qf.tolist()
    locals_ = [np.array([[0.3, 0.7], [0.6, 0.4]]), np.array([[0.5, 0.5], [0.2, 0.8], [0.9, 0.1]])]
    oracles["fixture_policy"] = [l.tolist() for l in locals_]
    pi = product_policy(locals_, ss, aa)
    oracles["fixture_policy_q"] = policy_q(Pf, Rf, gamma, pi).tolist()
    d = stationary_pairs(Pf, pi)
    oracles["fixture_stationary"] = d.tolist()
    oracles["fixture_average_reward"] = float((d * Rf).sum())
    du = stationary_pairs(Pf, np.full((6, 4), 0.25))
    oracles["fixture_aggregated_optimality"] = [
        aggregated(Pf, joint_reward(rewards, ss, aa, i), gamma, du, ss, aa, i).tolist() for i in range(2)]
    oracles["fixture_aggregated_evaluation"] = [
        aggregated(Pf, joint_reward(rewards, ss, aa, i), gamma, d, ss, aa, i, pi).tolist() for i in range(2)]

    eta = [0.2]
    for t in range(1, 6):
        eta.append(sum(eta) / 0.99 ** (2 * t - 1))
    oracles["experiment_eta"] = eta

    mask = (1 << 64) - 1
    def mix64(z):
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & mask
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB & mask
        return z ^ (z >> 31)
    oracles["splitmix_first_outputs_seed_42"] = [str(mix64((42 + k * 0x9E3779B97F4A7C15) & mask)) for k in range(1, 4)]

    (OUT / "fixture_mdp.json").write_text(json.dumps(spec, indent=1) + "\n")
    (OUT / "oracles.json").write_text(json.dumps(oracles, indent=1) + "\n")


if __name__ == "__main__":
    main()
