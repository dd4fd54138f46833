#!/usr/bin/env python3
"""Regenerates the shipped fixture dataset (src/labrag/data/labs.jsonl) and the
HTML parser fixtures under tests/fixtures/. Deterministic: safe to re-run."""

from __future__ import annotations

import json
import pathlib
import random
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from labrag.datasets import question_text_for  # noqa: E402
from labrag.factors import factor_order  # noqa: E402

BASE_URL = "https://ency.example.org/article"

UNITS = ["mg/dL", "U/L", "ng/mL", "mmol/L", "mcg/dL", "pg/mL", "IU/L", "g/dL",
         "mEq/L", "mm/hr", "mIU/mL", "nmol/L"]

# --- factorless labs (82) ---

FACTORLESS_SPECIAL = {
    "Aldolase blood test":
        "Normal results range between 1.0 to 7.5 units per liter "
        "(0.02 to 0.13 microkat/L). There is a slight difference between men and women.",
    "Acid-fast stain":
        "A normal result means no acid-fast bacteria were found on the stained sample",
    "Anti-smooth muscle antibody":
        "Normally, there are no antibodies present.",
}

FACTORLESS_PLAIN = [
    "Ammonia blood test", "BUN - blood test", "Acid loading test (pH)",
    "Albumin blood test", "ACE blood test", "Adiponectin blood test",
    "Amylase blood test", "Anion gap blood test", "Apolipoprotein B100 test",
    "Bicarbonate blood test", "Bilirubin blood test", "Blood glucose test",
    "C-peptide test", "C-reactive protein test", "CSF glucose test",
    "CSF total protein test", "Calcitonin blood test", "Calcium blood test",
    "Carbon dioxide blood test", "Ceruloplasmin blood test", "Chloride blood test",
    "Total cholesterol test", "Cortisol urine test", "CPK isoenzymes test",
    "Creatine phosphokinase test", "Cryoglobulins test", "D-dimer test",
    "Fibrinogen blood test", "Folate blood test", "Fructosamine blood test",
    "Gastrin blood test", "Glucagon blood test", "Glucose urine test",
    "Growth hormone test", "Haptoglobin blood test", "Homocysteine blood test",
    "Lactate dehydrogenase test", "Lactic acid blood test", "Lead blood test",
    "Lipase blood test", "Lithium blood test", "Magnesium blood test",
    "Methylmalonic acid blood test", "Myoglobin blood test", "Osmolality blood test",
    "Osmolality urine test", "Parathyroid hormone blood test", "Platelet count",
    "Porphyrins blood test", "Potassium blood test", "Prealbumin blood test",
    "Protein electrophoresis serum", "Prothrombin time (PT)", "Pyruvate kinase test",
    "Renin blood test", "Reticulocyte count", "Rheumatoid factor test",
    "Selenium blood test", "Serum free hemoglobin test", "Sodium blood test",
    "Sweat chloride test", "T3 resin uptake test", "Thyroglobulin test",
    "Thyroid-stimulating hormone (TSH) test", "Total protein blood test",
    "Transferrin blood test", "Triglyceride level test", "Troponin I test",
    "Urine pH test", "Urine protein test", "Urine sodium test",
    "Vitamin A blood test", "Vitamin B12 level test", "Vitamin D 25-hydroxy test",
    "Vitamin E blood test", "White blood cell count", "Zinc blood test",
    "Copper blood test", "Aluminum blood test",
]

# --- one-factor labs (28 labs, 55 questions) ---

SEX_LABS = [
    "Creatinine urine test", "Urine 17-ketosteroids test", "Hemoglobin blood test",
    "Hematocrit blood test", "Red blood cell (RBC) count", "Ferritin blood test",
    "Uric acid blood test", "Creatinine blood test", "Transferrin saturation test",
    "Serum iron test", "Testosterone blood test", "Prolactin blood test",
    "Gamma-glutamyl transferase (GGT) test",
]

AGE2_LABS = {
    "Prostate-specific antigen (PSA) blood test": ("under 60", "over 60"),
    "17-OH progesterone": ("under 18", "over 18"),
    "Alkaline phosphatase blood test": ("under 20", "over 20"),
    "Free PSA blood test": ("under 60", "over 60"),
    "Amylase urine test": ("under 65", "over 65"),
    "Erythropoietin test": ("under 40", "over 40"),
    "Antidiuretic hormone blood test": ("under 50", "over 50"),
    "Aldosterone blood test": ("under 15", "over 15"),
    "Pepsinogen blood test": ("under 70", "over 70"),
    "Homovanillic acid urine test": ("under 10", "over 10"),
    "Norepinephrine blood test": ("under 16", "over 16"),
    "Insulin C-peptide ratio test": ("under 30", "over 30"),
    "Thyroxine (T4) blood test": ("under 12", "over 12"),
    "Estrone blood test": ("under 55", "over 55"),
}

WATER_LAB = "Urine concentration test"

# --- two-factor labs (10 labs, 65 questions: 2x4 + 5x6 + 3x9) ---

AGE3 = ("Newborn", "Child", "Adult")
ADULT_AGE3 = ("Young adult", "Middle-aged", "Older adult")

TWOF_LABS = {
    "Erythrocyte sedimentation rate (ESR)": {
        "Age": ("over 50", "under 50"), "Sex": ("Male", "Female")},
    "HCG blood test - quantitative": {
        "Pregnancy status": ("Pregnant", "Not pregnant"), "Sex": ("Male", "Female")},
    "DHEA-sulfate test": {"Age": ADULT_AGE3, "Sex": ("Male", "Female")},
    "Estradiol blood test": {"Age": ADULT_AGE3, "Sex": ("Male", "Female")},
    "Follicle-stimulating hormone (FSH) blood test": {
        "Age": ADULT_AGE3, "Sex": ("Male", "Female")},
    "Free testosterone blood test": {"Age": ADULT_AGE3, "Sex": ("Male", "Female")},
    "Insulin-like growth factor 1 (IGF-1) test": {
        "Age": ADULT_AGE3, "Sex": ("Male", "Female")},
    "Cortisol blood test": {
        "Age": AGE3, "Time of day": ("Morning", "Afternoon", "Evening")},
    "Immunoglobulin G (IgG) level": {
        "Age": AGE3, "Specimen type": ("Serum", "Plasma", "Saliva")},
    "Phosphorus blood test": {
        "Age": AGE3, "Specimen type": ("Serum", "Plasma", "Saliva")},
}

# --- three-factor labs (2 labs, 10 questions: 4 + 6) ---

THREEF_LABS = {
    "Luteinizing hormone (LH) blood test": {
        "Age": ("Adult",), "Menstrual cycle phase": ("Follicular", "Luteal"),
        "Sex": ("Male", "Female")},
    "Serum progesterone": {
        "Menstrual cycle phase": ("Follicular", "Luteal", "Mid-cycle"),
        "Pregnancy status": ("Pregnant", "Not pregnant"), "Sex": ("Female",)},
}

# Paper-anchored answers that must appear verbatim.
PINNED_ANSWERS = {
    ("Red blood cell (RBC) count", ("Male",)): "4.7 to 6.1 million cells/mcL",
    ("Red blood cell (RBC) count", ("Female",)): "4.2 to 5.4 million cells/mcL",
}


def analyte_of(name: str) -> str:
    """Distinctive part of a lab name, minus generic test words."""
    words = [w for w in name.lower().split()
             if w not in {"blood", "urine", "test", "count", "level", "-"}]
    return " ".join(words) or name.lower()


def synth_range(rng: random.Random) -> str:
    unit = rng.choice(UNITS)
    lo = round(rng.uniform(0.1, 80.0), 1)
    hi = round(lo + rng.uniform(0.5, 120.0), 1)
    return f"{lo} to {hi} {unit}"


def lab_record(name: str, domains: dict[str, tuple[str, ...]],
               answers: dict[tuple[str, ...], str]) -> dict:
    ordered = factor_order(domains)
    questions = []

    def walk(prefix: tuple[str, ...], rest: list[str]):
        if not rest:
            fv = dict(zip(ordered, prefix))
            questions.append({
                "factor_values": fv,
                "question_text": question_text_for(name, fv),
                "true_answer": answers[prefix],
            })
            return
        for v in domains[rest[0]]:
            walk(prefix + (v,), rest[1:])

    walk((), ordered)
    slug = "".join(c if c.isalnum() else "-" for c in name.lower()).strip("-")
    return {
        "lab_name": name,
        "factors": ordered,
        "questions": questions,
        "url": f"{BASE_URL}/{slug}.htm",
    }


def build_labs() -> list[dict]:
    labs = []

    for name, text in FACTORLESS_SPECIAL.items():
        labs.append(lab_record(name, {}, {(): text}))
    templates = [
        "A normal {analyte} result is {rng}. Ask your provider what your {analyte} result means.",
        "The normal {analyte} value is {rng}. Your lab may measure {analyte} differently.",
        "Normal {analyte} results are {rng}. A {analyte} result outside this range may need follow-up.",
        "For adults, a typical {analyte} reading is {rng}. Discuss abnormal {analyte} readings with your provider.",
    ]
    for i, name in enumerate(FACTORLESS_PLAIN):
        rng = random.Random(f"labrag:{name}")
        text = templates[i % len(templates)].format(
            analyte=analyte_of(name), rng=synth_range(rng))
        labs.append(lab_record(name, {}, {(): text}))

    for name in SEX_LABS:
        rng = random.Random(f"labrag:{name}")
        domains = {"Sex": ("Male", "Female")}
        answers = {}
        for v in domains["Sex"]:
            answers[(v,)] = PINNED_ANSWERS.get((name, (v,)), synth_range(rng))
        labs.append(lab_record(name, domains, answers))

    for name, brackets in AGE2_LABS.items():
        rng = random.Random(f"labrag:{name}")
        domains = {"Age": brackets}
        answers = {(v,): synth_range(rng) for v in brackets}
        labs.append(lab_record(name, domains, answers))

    rng = random.Random(f"labrag:{WATER_LAB}")
    labs.append(lab_record(
        WATER_LAB, {"Water consumption": ("Normal fluid intake",)},
        {("Normal fluid intake",): f"The normal specific gravity is {synth_range(rng)}."}))

    for group in (TWOF_LABS, THREEF_LABS):
        for name, domains in group.items():
            rng = random.Random(f"labrag:{name}")
            ordered = factor_order(domains)
            answers = {}

            def combos(prefix, rest):
                if not rest:
                    answers[tuple(prefix)] = synth_range(rng)
                    return
                for v in domains[rest[0]]:
                    combos(prefix + [v], rest[1:])

            combos([], ordered)
            labs.append(lab_record(name, domains, answers))

    return labs


def check(labs: list[dict]) -> None:
    assert len(labs) == 122, len(labs)
    with_f = [l for l in labs if l["factors"]]
    without = [l for l in labs if not l["factors"]]
    assert len(with_f) == 40 and len(without) == 82, (len(with_f), len(without))
    total_q = sum(len(l["questions"]) for l in labs)
    assert total_q == 212, total_q
    strata = {}
    for l in labs:
        strata.setdefault(len(l["factors"]), [0, 0])
        strata[len(l["factors"])][0] += 1
        strata[len(l["factors"])][1] += len(l["questions"])
    assert strata[0] == [82, 82], strata
    assert strata[1] == [28, 55], strata
    assert strata[2] == [10, 65], strata
    assert strata[3] == [2, 10], strata
    names = [l["lab_name"] for l in labs]
    assert len(set(names)) == len(names)


def write_labs(labs: list[dict]) -> None:
    out = ROOT / "src" / "labrag" / "data" / "labs.jsonl"
    with out.open("w", encoding="utf-8") as fh:
        for lab in sorted(labs, key=lambda l: l["lab_name"].lower()):
            fh.write(json.dumps(lab, ensure_ascii=False) + "\n")
    print(f"wrote {out} ({len(labs)} labs)")


# --- HTML parser fixtures ---

PAGE_TMPL = """<!DOCTYPE html>
<html><head><title>{title}: MedlinePlus Medical Encyclopedia</title></head>
<body>
<div class="page">
<h1>{title}</h1>
<div class="section"><h2>Why the Test is Performed</h2>
<p>Your provider may order this test to check your health.</p></div>
{normal}
<div class="section"><h2>Risks</h2><p>There is little risk.</p></div>
</div>
</body></html>
"""

FIXTURE_PAGES = {
    "aldolase.html": {
        "html": PAGE_TMPL.format(
            title="Aldolase blood test",
            normal='<div class="section"><h2>Normal Results</h2>\n'
                   '<p>Normal results range between 1.0 to 7.5 units per liter '
                   '(0.02 to 0.13 microkat/L).</p>\n'
                   '<p>There is a slight difference between men and women.</p></div>'),
        "expected": {
            "lab_name": "Aldolase blood test",
            "normal_results": "Normal results range between 1.0 to 7.5 units per liter "
                              "(0.02 to 0.13 microkat/L). There is a slight difference "
                              "between men and women.",
        },
    },
    "esr.html": {
        "html": PAGE_TMPL.format(
            title="Erythrocyte sedimentation rate (ESR)",
            normal='<div class="section"><h2>Normal Results</h2>\n'
                   '<p>Adults (Westergren method):</p>\n<ul>\n'
                   '<li>Males under 50: less than 15 mm/hr</li>\n'
                   '<li>Males over 50: less than 20 mm/hr</li>\n'
                   '<li>Females under 50: less than 20 mm/hr</li>\n'
                   '<li>Females over 50: less than 30 mm/hr</li>\n'
                   '</ul></div>'),
        "expected": {
            "lab_name": "Erythrocyte sedimentation rate (ESR)",
            "normal_results": "Adults (Westergren method): Males under 50: less than "
                              "15 mm/hr; Males over 50: less than 20 mm/hr; Females "
                              "under 50: less than 20 mm/hr; Females over 50: less "
                              "than 30 mm/hr",
        },
    },
    "tag_soup.html": {
        "html": "<html><h1>Potassium   blood <b>test</b>\n"
                "<h2> normal RESULTS </h2><p>The normal range is 3.7 to 5.2 mEq/L "
                "(3.70 to\n   5.20 mmol/L).<h2>Risks</h2><p>Few risks.",
        "expected": {
            "lab_name": "Potassium blood test",
            "normal_results": "The normal range is 3.7 to 5.2 mEq/L (3.70 to 5.20 mmol/L).",
        },
    },
    "nested_list.html": {
        "html": PAGE_TMPL.format(
            title="Cortisol blood test",
            normal='<div class="section"><h2>Normal Results</h2>'
                   '<ul><li>Adults:<ul><li>Morning: 5 to 25 mcg/dL</li>'
                   '<li>Evening: 3 to 13 mcg/dL</li></ul></li>'
                   '<li>Children: 3 to 21 mcg/dL</li></ul></div>'),
        "expected": {
            "lab_name": "Cortisol blood test",
            "normal_results": "Adults:; Morning: 5 to 25 mcg/dL; "
                              "Evening: 3 to 13 mcg/dL; Children: 3 to 21 mcg/dL",
        },
    },
    "no_normal_results.html": {
        "html": PAGE_TMPL.format(title="Genetic counseling page", normal=""),
        "expected": None,
    },
    "empty_section.html": {
        "html": PAGE_TMPL.format(
            title="Broken page",
            normal='<div class="section"><h2>Normal Results</h2></div>'),
        "expected": "EmptySection",
    },
}


def write_html_fixtures() -> None:
    html_dir = ROOT / "tests" / "fixtures" / "html"
    html_dir.mkdir(parents=True, exist_ok=True)
    golden = []
    for fname, spec in FIXTURE_PAGES.items():
        (html_dir / fname).write_text(spec["html"], encoding="utf-8")
        golden.append({"file": fname, "expected": spec["expected"]})
    gpath = ROOT / "tests" / "fixtures" / "golden_docs.jsonl"
    with gpath.open("w", encoding="utf-8") as fh:
        for rec in golden:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    print(f"wrote {len(FIXTURE_PAGES)} html fixtures + {gpath.name}")


if __name__ == "__main__":
    labs = build_labs()
    check(labs)
    write_labs(labs)
    write_html_fixtures()
