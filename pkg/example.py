"""
Manual walk-through of the gaplab package.

Instructions:
1. Optionally create a .env file with GAPLAB_LOG_LEVEL=INFO to see progress logs
2. Install: pip install -e ".[dev]"
3. Run: python example.py
"""

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

from gaplab import (
    ConditionViolationError,
    ExperimentConfig,
    GapLab,
    MODELS,
    run_constrained_report,
)
from gaplab.cli import configure_logging

configure_logging()

print("=" * 50)
print("📚 Registered models:")
for tag in MODELS.list_models():
    print(f"   • {tag}: {MODELS.get(tag).summary()['description']}")
print("=" * 50)
print()

# Square-root staffing for M/M/N with equal waiting and server costs
lab = GapLab(ExperimentConfig(model="mmn-hw", h=1.0, c=1.0, n_grid=(1e2, 1e3, 1e4), refined=True))
report = lab.prescribe()
print(f"🎯 x_star = {report['x_star']:.6f}")
for n, level in report["staffing"].items():
    print(f"   n={n:g}: staff {level:.2f} servers")
print()

print("📉 Gap table:")
for row in lab.run_gap_table().rows:
    print(f"   n={row['n']} {row['variant']}: gap={row['gap']:.3g} flags={row['flags'] or '-'}")
print()

# Erlang-A with abandonment; staffing is rounded to whole servers
diffusion = GapLab(ExperimentConfig(model="mmna-diffusion", gamma=0.5, h=2.0, c=1.0, n_grid=(1e2, 1e3)))
for record in diffusion.evaluate()["gaps"]:
    print(
        f"🔢 Erlang-A n={record.n:g}: prescribed {record.staffing_prescribed:g}, "
        f"optimal {record.staffing_optimal:g}, gap {record.gap:.3g}"
    )
print()

# A waiting cost of zero leaves nothing to trade off against servers
try:
    GapLab(ExperimentConfig(h=0.0)).prescribe()
except ConditionViolationError as e:
    print(f"❌ Error handled gracefully: {e}")
print()

constrained = run_constrained_report(ExperimentConfig(alpha=0.2, n_grid=(1e2, 1e3, 1e4)))
print("⏱️  Staffing for P(wait) <= 0.2:")
for row in constrained.rows:
    print(f"   n={row['n']:g}: sqrt rule {row['staffing_sqrt']}, exact {row['staffing_exact']}")
for note in constrained.notes:
    print(f"   note: {note}")

print("=" * 50)
print("🎉 Walk-through complete!")
print("=" * 50)
