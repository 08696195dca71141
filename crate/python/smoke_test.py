#!/usr/bin/env python3
"""End-to-end smoke test for the crn Python bindings.

Run after building the extension:

    cargo build -p crn-py --release
    python3 python/smoke_test.py
"""

import sys
import pathlib

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

import crn


def check_counting():
    assert [crn.count_steps(m) for m in range(2, 9)] == [5, 24, 69, 155, 300, 525, 854]
    assert crn.count_mechanisms(3, 2) == 276
    assert crn.count_mechanisms(3, 2, exact_species=True) == 246
    assert crn.count_mechanisms(8, 400) > 10**100  # arbitrary precision survives
    assert len(crn.enumerate_steps(3)) == 24
    census = crn.step_type_census(4)
    assert census == [6, 12, 12, 12, 12, 12, 3] and sum(census) == 69
    print("ok counting")


def check_analysis():
    mech = crn.Mechanism("X <=> Y; 2 X <=> X + Y")
    assert mech.m == 2 and mech.r == 2
    assert mech.species == ["X", "Y"]
    assert mech.steps == ["X <=> Y", "2 X <=> X + Y"]
    assert str(mech) == "X <=> Y; 2 X <=> X + Y"
    assert mech.canonical_id == crn.Mechanism("2 X <=> X + Y; X <=> Y").canonical_id

    info = mech.analyze()
    assert (info["N"], info["L"], info["S"], info["deficiency"]) == (4, 2, 1, 1)
    assert info["reversible"] and info["mass_conserving"]
    assert info["db_class"] == "CDB"
    assert info["conditions"][0]["rendered"] == "k-1 k2 = k-2 k1"
    assert mech.equilibrium_basis() == [[1, 1]]  # K1 = K2 is the one constraint

    assert crn.Mechanism("X -> Y").analyze()["db_class"] is None
    print("ok analysis")


def check_enumeration():
    found = crn.enumerate_mechanisms(3, 2, mass_conserving=True, db_class="cdb")
    assert len(found) == 18
    assert len({m.canonical_id for m in found}) == 18
    assert all(m.analyze()["db_class"] == "CDB" for m in found)
    first_three = crn.enumerate_mechanisms(3, 2, mass_conserving=True, db_class="cdb", limit=3)
    assert [m.canonical_id for m in first_three] == [m.canonical_id for m in found[:3]]
    print("ok enumeration")


def check_simulation():
    mech = crn.Mechanism("X <=> Y; 2 X <=> X + Y")
    rates = "k1=0.1,k-1=0.1,k2=1,k-2=1"
    sim = mech.simulate(rates, {"X": 2.0, "Y": 3.0}, t_end=10.0, dt=0.5)
    assert sim["species"] == ["X", "Y"]
    assert len(sim["times"]) == 21 and sim["times"][-1] == 10.0
    totals = [x + y for x, y in zip(sim["values"]["X"], sim["values"]["Y"])]
    assert all(abs(t - 5.0) < 1e-6 for t in totals)  # mass conservation

    noisy = mech.simulate(rates, {"X": 2.0, "Y": 3.0}, t_end=10.0, dt=0.5, noise=0.02, seed=7)
    again = mech.simulate(rates, {"X": 2.0, "Y": 3.0}, t_end=10.0, dt=0.5, noise=0.02, seed=7)
    assert noisy["values"] == again["values"]  # seeded noise reproduces
    assert noisy["values"]["X"] != sim["values"]["X"]
    assert all(v >= 0.0 for v in noisy["values"]["X"])
    print("ok simulation")


def check_detailed_balance():
    mech = crn.Mechanism("X <=> Y; 2 X <=> X + Y")
    full = mech.db_complete("k1=1,k-1=2,k2=3")
    assert full["k_plus"] == [1.0, 3.0]
    assert abs(full["k_minus"][1] - 6.0) < 1e-12  # k-2 = k-1 k2 / k1
    print("ok detailed balance")


def check_fitting():
    data = crn.load_data("fixture:salicylic")
    assert data["species"] == ["X", "Z"]
    assert data["values"]["X"][0] is None  # X unobserved at t = 0
    assert data["init"]["X"] == 0.0172

    fit = crn.Mechanism("X -> Y; Y -> Z").fit(data["times"], data["values"], init=data["init"])
    assert fit["converged"]
    assert fit["names"] == ["k1", "k2"]
    k1, k2 = fit["estimates"]
    assert abs(k1 - 0.080) < 0.005
    assert abs(k2 - 0.175) < 0.020
    assert fit["std_errors"] is not None and fit["p"] == 2
    assert fit["aic"] < fit["bic"] + 2.0  # both finite and comparable

    # Constrained fit of a reversible mechanism respects detailed balance.
    mech = crn.Mechanism("X <=> Y; 2 X <=> X + Y")
    sim = mech.simulate("k1=0.1,k-1=0.1,k2=1,k-2=1", {"X": 2.0, "Y": 3.0}, t_end=10.0, dt=0.5)
    res = mech.fit(sim["times"], sim["values"], init={"X": 2.0, "Y": 3.0}, db_constrained=True)
    assert res["converged"] and res["db_violation"] < 1e-10
    for est, truth in zip(res["estimates"], [0.1, 0.1, 1.0, 1.0]):
        assert abs(est - truth) < 1e-3
    print("ok fitting")


def main():
    check_counting()
    check_analysis()
    check_enumeration()
    check_simulation()
    check_detailed_balance()
    check_fitting()
    print("smoke test passed")


if __name__ == "__main__":
    main()
