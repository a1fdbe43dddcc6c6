"""Write data/lemmas.tsv (surface<TAB>lemma) from the simplemma English
dictionary, restricted to the most frequent English word forms (wordfreq).

Requires: pip install simplemma wordfreq
"""
import re
import sys

from simplemma.strategies.dictionaries.dictionary_factory import DefaultDictionaryFactory
from wordfreq import top_n_list

TOP_N = 24000
ALPHA = re.compile(r"^[a-z]+$")

lemmas = DefaultDictionaryFactory().get_dictionary("en")
out = sys.argv[1] if len(sys.argv) > 1 else "crates/core/data/lemmas.tsv"

rows = {}
for word in top_n_list("en", TOP_N):
    if not ALPHA.match(word):
        continue
    lemma = lemmas.get(word)
    if lemma is None or not ALPHA.match(lemma):
        continue
    rows[word] = lemma

with open(out, "w") as f:
    for word in sorted(rows):
        f.write(f"{word}\t{rows[word]}\n")
print(len(rows), "entries", file=sys.stderr)
