# Every layout reproduces a plain np.roll reference bit for bit.

from lbmlayout.validation import run_validation

report = run_validation(geometries=[(16, 32), (64, 128)], vl_list=[1, 2, 4, 8], steps=10, seed=0)
for case in report.cases:
    print(case.line())
print(report.summary())
assert report.passed
