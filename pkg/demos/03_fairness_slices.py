# %% [markdown]
# Group error rates by age band and marital status
#
# Inject a base-rate shift for one age band, then look at per-group
# confusion matrices, disparate impact and equalized-odds gaps.

# %%
from pdfair import harness
from pdfair.fairness import fairness_report, slice_by

config = harness.RunConfig(
    synth=harness.SynthSpec(rows=80_000, default_rate=0.1155, seed=11, group_effects={"Age:51-60": 0.8}),
    seed=11,
    threshold=0.15,
    svd=harness.SvdSpec(3),
    group_by=(harness.GroupSpec("Age", "18-30,31-40,41-50,51-60,61+"), harness.GroupSpec("MaritalStatus")),
)
report = harness.ablate(config)

# %%
for arm in report.arms:
    rep = arm.fairness["Age"]
    print(arm.arm, "reference group", rep.reference)
    for g in rep.groups:
        di = rep.disparate_impact[g.label]
        print(f"  {g.label:>6} n={g.n:6d} tp={g.cm.tp:5d} fn={g.cm.fn:5d} fnr={g.fnr:.3f} DI={di if di is None else round(di, 3)}")
    print("  gaps: FPR", round(rep.eq_odds_fpr_gap, 4), "FNR", round(rep.eq_odds_fnr_gap, 4))

# %%
# group matrices always add back to the overall matrix
for arm in report.arms:
    for rep in arm.fairness.values():
        assert rep.total_confusion() == arm.cm

# %%
# the same tools work directly on labels; here a predictor that never says "default"
frame = harness.load_frame(config)
slices = slice_by(frame, "MaritalStatus")
y = frame.target
rep = fairness_report("MaritalStatus", y, 0 * y, slices)
print(rep.disparate_impact)
print(rep.notes)
