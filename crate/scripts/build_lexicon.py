"""Write data/lexicon.tsv (lemma<TAB>polarity<TAB>subjectivity) from the
Pattern English adjective lexicon (en-sentiment.xml, PDDL; also shipped
inside the textblob package).

Senses of a word form are averaged. Forms are keyed by their lemma from
data/lemmas.tsv; when several forms share a lemma the form equal to the
lemma wins, otherwise the forms are averaged.

Usage: python build_lexicon.py path/to/en-sentiment.xml
"""
import sys
import xml.etree.ElementTree as ET
from collections import defaultdict

src = sys.argv[1]
lemma_path = "crates/core/data/lemmas.tsv"
out = sys.argv[2] if len(sys.argv) > 2 else "crates/core/data/lexicon.tsv"

lemmas = {}
with open(lemma_path) as f:
    for line in f:
        surface, lemma = line.rstrip("\n").split("\t")
        lemmas[surface] = lemma

senses = defaultdict(list)
for w in ET.parse(src).getroot().iter("word"):
    form = w.get("form").lower()
    if not form.isalpha():
        continue
    senses[form].append((float(w.get("polarity")), float(w.get("subjectivity"))))

per_form = {
    form: (sum(p for p, _ in v) / len(v), sum(s for _, s in v) / len(v))
    for form, v in senses.items()
}

by_lemma = defaultdict(list)
for form, score in per_form.items():
    by_lemma[lemmas.get(form, form)].append((form, score))

with open(out, "w") as f:
    f.write("# lemma\tpolarity\tsubjectivity (Pattern en-sentiment, PDDL; senses averaged)\n")
    for lemma in sorted(by_lemma):
        forms = by_lemma[lemma]
        exact = [s for form, s in forms if form == lemma]
        if exact:
            p, s = exact[0]
        else:
            p = sum(s[0] for _, s in forms) / len(forms)
            s = sum(s[1] for _, s in forms) / len(forms)
        f.write(f"{lemma}\t{p:.4f}\t{s:.4f}\n")
