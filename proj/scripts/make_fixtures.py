# SPDX-License-Identifier: Apache-2.0
"""Generate the synthetic dataset fixtures shipped under data/.

The files mirror the schemas, row counts and class balances of the Pima
Indians Diabetes and processed Cleveland heart disease files, with labels
drawn from a noisy logistic ground truth so the classification tasks are
learnable. Real data can be dropped in at the same paths; see data/README.md.
"""
import os

import numpy as np

OUT = os.path.join(os.path.dirname(__file__), "..", "data")


def zscore(x):
    return (x - x.mean()) / x.std()


def make_pima(rng):
    n = 768
    preg = rng.binomial(12, 0.28, n)
    glucose = np.clip(rng.normal(121, 31, n), 44, 199).round()
    bp = np.clip(rng.normal(72, 12, n), 24, 122).round()
    skin = np.clip(rng.normal(29, 10, n), 7, 99).round()
    insulin = np.clip(rng.gamma(2.0, 60.0, n), 14, 846).round()
    bmi = np.clip(rng.normal(32.4, 6.9, n), 18.2, 67.1).round(1)
    dpf = np.clip(rng.gamma(2.2, 0.21, n), 0.078, 2.42).round(3)
    age = np.clip(rng.gamma(2.2, 6.0, n) + 21, 21, 81).round()

    logit = (2.2 * zscore(glucose) + 1.3 * zscore(bmi) + 0.9 * zscore(age)
             + 0.7 * zscore(dpf) + 0.5 * zscore(preg) - 1.05)
    p = 1.0 / (1.0 + np.exp(-2.2 * logit))
    y = (rng.uniform(size=n) < p).astype(int)

    header = ("Pregnancies,Glucose,BloodPressure,SkinThickness,Insulin,"
              "BMI,DiabetesPedigreeFunction,Age,Outcome")
    rows = []
    for i in range(n):
        rows.append(f"{preg[i]},{glucose[i]:.0f},{bp[i]:.0f},{skin[i]:.0f},"
                    f"{insulin[i]:.0f},{bmi[i]:.1f},{dpf[i]:.3f},{age[i]:.0f},{y[i]}")
    print("pima positives:", y.mean())
    return header, rows


def make_heart(rng):
    n = 303
    age = np.clip(rng.normal(54, 9, n), 29, 77).round()
    sex = rng.binomial(1, 0.68, n)
    cp = rng.integers(1, 5, n)
    trestbps = np.clip(rng.normal(131, 17, n), 94, 200).round()
    chol = np.clip(rng.normal(247, 51, n), 126, 564).round()
    fbs = rng.binomial(1, 0.15, n)
    restecg = rng.integers(0, 3, n)
    thalach = np.clip(rng.normal(150, 22, n), 71, 202).round()
    exang = rng.binomial(1, 0.33, n)
    oldpeak = np.clip(rng.gamma(1.3, 0.8, n), 0, 6.2).round(1)
    slope = rng.integers(1, 4, n)
    ca = rng.binomial(3, 0.22, n)
    thal = rng.choice([3, 6, 7], n, p=[0.55, 0.12, 0.33])

    # a sparse rule over three strong predictors keeps the task learnable by
    # a small MLP within the experiment round budgets
    logit = 1.5 * zscore(oldpeak) - 1.5 * zscore(thalach) + 1.0 * zscore(cp)
    logit = logit - np.median(logit) - 0.1
    p = 1.0 / (1.0 + np.exp(-6.0 * logit))
    y = (rng.uniform(size=n) < p).astype(int)
    # positive classes carry severity codes 1-4 as in the raw file
    target = np.where(y == 1, rng.integers(1, 5, n), 0)

    missing = rng.choice(n, 6, replace=False)

    header = ("age,sex,cp,trestbps,chol,fbs,restecg,thalach,exang,"
              "oldpeak,slope,ca,thal,target")
    rows = []
    for i in range(n):
        ca_s, thal_s = f"{ca[i]}", f"{thal[i]}"
        if i in missing:
            if i % 2 == 0:
                ca_s = "?"
            else:
                thal_s = "?"
        rows.append(f"{age[i]:.0f},{sex[i]},{cp[i]},{trestbps[i]:.0f},{chol[i]:.0f},"
                    f"{fbs[i]},{restecg[i]},{thalach[i]:.0f},{exang[i]},"
                    f"{oldpeak[i]:.1f},{slope[i]},{ca_s},{thal_s},{target[i]}")
    kept = np.ones(n, bool)
    kept[missing] = False
    print("heart positives (kept rows):", y[kept].mean(), "kept:", kept.sum())
    return header, rows


def write(name, header, rows):
    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, name), "w") as f:
        f.write(header + "\n")
        f.write("\n".join(rows) + "\n")


def main():
    # independent streams so regenerating one file never shifts the other
    write("pima.csv", *make_pima(np.random.default_rng(20240817)))
    write("heart.csv", *make_heart(np.random.default_rng(20240817)))


if __name__ == "__main__":
    main()
