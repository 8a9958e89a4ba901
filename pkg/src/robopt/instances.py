"""Bundled example instances.

Three models exercise the main problem classes the package supports:

* :func:`build_rsfc` -- a retailer-supplier flexible-commitment inventory
  problem with exogenous demand uncertainty and a worst-case objective.
* :func:`build_pandora` -- a box-opening search problem where the time at
  which each box value is revealed is itself a decision (robust objective,
  factor-model uncertainty).
* :func:`build_bestbox` -- a stochastic variant with uncertain opening
  costs, a budget row, and an expectation objective over uniform values.
"""

from __future__ import annotations

from .model import (Model, LinearExpr, ROBUST, STOCHASTIC, REAL, BINARY,
                    quicksum)
from . import uncertainty as usets


def build_rsfc(uset="box", omega=None):
    """Retailer-supplier flexible commitment over ``T = 12`` periods.

    The retailer fixes commitments up front, then orders each period after
    seeing past demand.  Deviation, holding, and shortage costs are
    linearized with epigraph variables.  ``uset`` selects the demand set:
    ``"box"`` (each demand within 10% of the nominal 100) or
    ``"ellipsoid"`` (demand within a Euclidean ball of radius ``omega``
    around the nominal vector).
    """
    T = 12
    nominal = 100.0
    rho = 0.10
    init_inventory = 0.0
    init_commit = 100.0
    order_lb, order_ub = 0.0, 200.0
    c_order, c_hold, c_short = 10.0, 2.0, 10.0
    c_dc_plus = c_dc_minus = c_dp_plus = c_dp_minus = 10.0

    m = Model(T + 1, ROBUST)
    demand = {t: m.add_uncertainty("Demand_%d" % t, stage=t)
              for t in range(1, T + 1)}

    commit = {t: m.add_variable("Commit_%d" % t, lb=0.0)
              for t in range(1, T + 1)}
    order = {t: m.add_variable("Order_%d" % t, adaptive=(t > 1), stage=t,
                               lb=order_lb, ub=order_ub)
             for t in range(1, T + 1)}
    max_dc = {t: m.add_variable("MaxDC_%d" % t) for t in range(1, T + 1)}
    max_dp = {t: m.add_variable("MaxDP_%d" % t, adaptive=(t > 1), stage=t)
              for t in range(1, T + 1)}
    max_hs = {t: m.add_variable("MaxHS_%d" % t, adaptive=True, stage=t)
              for t in range(2, T + 2)}

    inventory = LinearExpr.wrap(init_inventory)
    cumulative = LinearExpr.wrap(0.0)
    for t in range(1, T + 1):
        inventory = inventory + order[t] - demand[t]
        cumulative = cumulative + order[t]
        m.add_constraint(cumulative >= 0.0)
        m.add_constraint(cumulative <= order_ub * t)
        prev_commit = commit[t - 1] if t > 1 else init_commit
        m.add_constraint(
            max_dc[t] >= c_dc_plus * (commit[t] - prev_commit))
        m.add_constraint(
            max_dc[t] >= c_dc_minus * (prev_commit - commit[t]))
        m.add_constraint(max_dp[t] >= c_dp_plus * (order[t] - commit[t]))
        m.add_constraint(max_dp[t] >= c_dp_minus * (commit[t] - order[t]))
        m.add_constraint(max_hs[t + 1] >= c_hold * inventory)
        m.add_constraint(max_hs[t + 1] >= (-c_short) * inventory)

    m.set_objective(quicksum(
        c_order * order[t] + max_dc[t] + max_dp[t] + max_hs[t + 1]
        for t in range(1, T + 1)))

    uncs = [demand[t] for t in range(1, T + 1)]
    if uset == "box":
        usets.box_set(m, uncs, nominal * (1 - rho), nominal * (1 + rho))
    elif uset == "ellipsoid":
        if omega is None:
            omega = 30.0
        usets.ellipsoid_set(m, uncs, [nominal] * T, omega)
    else:
        raise ValueError("unknown uncertainty set %r" % (uset,))
    return m


def build_pandora():
    """Box search with decision-dependent revelation of box values.

    Five boxes with uncertain values tied to four common factors; opening
    box ``i`` costs ``c_i`` and reveals its value.  At most one box may be
    opened per period, the search stops once a box is kept, and the kept
    box's value is earned.  Worst-case profit is maximized, stored here as
    minimization of its negation.
    """
    theta = 1.0
    T, I = 4, 5
    cost = [0.69, 0.43, 0.01, 0.91, 0.64]
    nominal = [5.2, 8.0, 19.4, 9.6, 13.2]
    phi = [[0.17, -0.70, -0.13, -0.60],
           [0.39, 0.88, 0.74, 0.78],
           [0.17, -0.60, -0.17, -0.84],
           [0.09, -0.07, -0.52, 0.88],
           [0.78, 0.94, 0.43, -0.58]]

    m = Model(T, ROBUST)
    value = {i: m.add_uncertainty("Value_%d" % i) for i in range(1, I + 1)}
    meas = {}
    for i in range(1, I + 1):
        fam = m.add_ddu(value[i], 1, T, cost=cost[i - 1])
        for t in range(1, T + 1):
            meas[t, i] = fam[t - 1]
    keep = {(t, i): m.add_variable("Keep_%d_%d" % (t, i), kind=BINARY,
                                   adaptive=(t > 1), stage=t)
            for t in range(1, T + 1) for i in range(1, I + 1)}

    stopped = LinearExpr.wrap(0.0)
    for t in range(1, T + 1):
        stopped = stopped + quicksum(keep[t, i] for i in range(1, I + 1))
        opened = quicksum(
            (meas[t, i] - meas[t - 1, i]) if t > 1
            else LinearExpr.wrap(meas[t, i])
            for i in range(1, I + 1))
        m.add_constraint(opened <= 1.0 - stopped)
        for i in range(1, I + 1):
            if t == 1:
                m.add_constraint(LinearExpr.wrap(keep[t, i]) <= 0.0)
            else:
                m.add_constraint(
                    LinearExpr.wrap(keep[t, i]) <= meas[t - 1, i])

    profit = quicksum(
        (theta ** (t - 1)) * (value[i] * keep[t, i])
        for t in range(1, T + 1) for i in range(1, I + 1))
    m.set_objective(profit * -1.0)

    usets.factor_model_set(m, [value[i] for i in range(1, I + 1)],
                           phi, nominal)
    return m


def build_bestbox():
    """Stochastic box search with uncertain opening costs and a budget.

    Box values and opening costs are uniform on ``[0, ub]`` and are
    revealed together when the box is opened.  Total spending may not
    exceed the budget in any outcome, and the expected value of the kept
    box is maximized (stored as minimization of its negation).
    """
    theta = 1.0
    T, I = 4, 5
    budget = 163.0
    cost_ub = [40.0, 86.0, 55.0, 37.0, 30.0]
    value_ub = [1030.0, 1585.0, 971.0, 971.0, 694.0]

    m = Model(T, STOCHASTIC)
    cost = {i: m.add_uncertainty("Cost_%d" % i) for i in range(1, I + 1)}
    value = {i: m.add_uncertainty("Value_%d" % i) for i in range(1, I + 1)}
    mv_cost, mv_val = {}, {}
    for i in range(1, I + 1):
        fam = m.add_ddu(cost[i], 1, T)
        for t in range(1, T + 1):
            mv_cost[t, i] = fam[t - 1]
        fam = m.add_ddu(value[i], 1, T)
        for t in range(1, T + 1):
            mv_val[t, i] = fam[t - 1]
        m.pair_uncertainties(cost[i], value[i])
    keep = {(t, i): m.add_variable("Keep_%d_%d" % (t, i), kind=BINARY,
                                   adaptive=(t > 1), stage=t)
            for t in range(1, T + 1) for i in range(1, I + 1)}

    m.add_constraint(
        quicksum(cost[i] * mv_val[T, i] for i in range(1, I + 1)) <= budget)
    stopped = LinearExpr.wrap(0.0)
    for t in range(1, T + 1):
        stopped = stopped + quicksum(keep[t, i] for i in range(1, I + 1))
        opened = quicksum(
            (mv_val[t, i] - mv_val[t - 1, i]) if t > 1
            else LinearExpr.wrap(mv_val[t, i])
            for i in range(1, I + 1))
        m.add_constraint(opened <= 1.0 - stopped)
        for i in range(1, I + 1):
            if t == 1:
                m.add_constraint(LinearExpr.wrap(keep[t, i]) <= 0.0)
            else:
                m.add_constraint(
                    LinearExpr.wrap(keep[t, i]) <= mv_val[t - 1, i])

    profit = quicksum(
        (theta ** (t - 1)) * (value[i] * keep[t, i])
        for t in range(1, T + 1) for i in range(1, I + 1))
    m.set_objective(profit * -1.0)

    support = {}
    for i in range(1, I + 1):
        m.add_constraint(cost[i] >= 0.0, uncertainty_set=True)
        m.add_constraint(cost[i] <= cost_ub[i - 1], uncertainty_set=True)
        m.add_constraint(value[i] >= 0.0, uncertainty_set=True)
        m.add_constraint(value[i] <= value_ub[i - 1], uncertainty_set=True)
        support[cost[i]] = (0.0, cost_ub[i - 1])
        support[value[i]] = (0.0, value_ub[i - 1])
    m.set_distribution(support)
    return m
