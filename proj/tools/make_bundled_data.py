#!/usr/bin/env python3
"""Regenerate the bundled desk-scale resources under data/.

Everything here is synthetic and deterministic (fixed seed):

  polarity.csv      label,text sentence-polarity corpus (movie-review register)
  embeddings.txt    word vectors in word2vec text format (with a `V d` header)
  pos_lexicon.tsv   word<TAB>tag:freq[,tag:freq...]
  suffix_rules.tsv  suffix<TAB>tag, highest priority first
  synonyms.tsv      word<TAB>syn1,syn2,...   (small thesaurus for the WNA baseline)

Vectors are built from a per-group centroid, a shared polarity axis and
per-word noise, so opposite-polarity words of the same kind land inside each
other's neighborhoods the way antonyms do in distributional embeddings.
"""

import csv
import os
import random

import numpy as np

SEED = 20190301
DIM = 48
OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")

GROUPS = {
    # name: (tag, polarity, words)
    "adj_pos": ("ADJ", +1, """good great excellent wonderful superb brilliant charming delightful
        enjoyable lovely beautiful fine pleasant clever touching funny fresh solid impressive
        terrific fantastic marvelous engaging witty gorgeous stunning gripping elegant smart
        powerful""".split()),
    "adj_neg": ("ADJ", -1, """bad awful terrible horrible dreadful boring dull weak poor lame
        mediocre tedious clumsy ugly stupid bland messy silly flat annoying painful pointless
        shallow predictable sloppy forgettable tiresome pathetic trite lousy""".split()),
    "adj_neu": ("ADJ", 0, """long short new old recent early late french american british final
        second first small large young local modern classic original main latest entire whole
        usual""".split()),
    "verb_pos": ("VERB", +1, "love adore enjoy like admire recommend appreciate praise cherish treasure".split()),
    "verb_neg": ("VERB", -1, "hate dislike despise loathe detest regret resent dread avoid mock".split()),
    "verb_neu": ("VERB", 0, """watch see review discuss describe remember rent stream follow notice
        mention compare expect consider""".split()),
    "verb_link": ("VERB", 0, "was is seemed felt looked became remained appeared sounded proved".split()),
    "noun_film": ("NOUN", 0, """film movie story plot acting script cast director ending soundtrack
        scene dialogue performance character picture show sequel screenplay direction
        cinematography score premise finale climax narrative production effects pacing humor
        romance""".split()),
    "noun_people": ("NOUN", 0, "actor actress hero villain star writer audience critic kid family".split()),
    "noun_pos": ("NOUN", +1, "masterpiece triumph gem delight treat joy success pleasure marvel winner".split()),
    "noun_neg": ("NOUN", -1, "mess disaster failure bore flop disappointment waste letdown mistake chore".split()),
    "noun_animal": ("NOUN", 0, "cat dog puppy kitten horse rabbit bird hamster".split()),
    "noun_object": ("NOUN", 0, "book table chair lamp car phone window door".split()),
    "noun_time": ("NOUN", 0, "year summer night weekend week day evening month".split()),
    "adv": ("ADV", 0, "very really quite truly rather fairly extremely incredibly somewhat simply totally".split()),
    "det": ("DET", 0, "the a an this that these those every".split()),
    "pron": ("PRON", 0, "i we you it they he she my our their".split()),
    "prep": ("PREP", 0, "of in with for on at about from by to".split()),
    "conj": ("CONJ", 0, "and but or yet so".split()),
    "num": ("NUM", 0, "one two three ten".split()),
}

# Groups sharing a centroid; polarity separates them along the shared axis.
CENTROID_OF = {
    "adj_pos": "adj_eval", "adj_neg": "adj_eval",
    "verb_pos": "verb_eval", "verb_neg": "verb_eval",
    "noun_pos": "noun_eval", "noun_neg": "noun_eval",
}

AMBIGUOUS = {
    "film": [("NOUN", 0.85), ("VERB", 0.15)],
    "show": [("NOUN", 0.6), ("VERB", 0.4)],
    "like": [("VERB", 0.6), ("PREP", 0.4)],
    "score": [("NOUN", 0.8), ("VERB", 0.2)],
    "treat": [("NOUN", 0.55), ("VERB", 0.45)],
    "star": [("NOUN", 0.8), ("VERB", 0.2)],
    "that": [("DET", 0.6), ("PRON", 0.25), ("CONJ", 0.15)],
    "fine": [("ADJ", 0.8), ("NOUN", 0.1), ("ADV", 0.1)],
    "so": [("CONJ", 0.5), ("ADV", 0.5)],
    "well": [("ADV", 0.7), ("ADJ", 0.2), ("NOUN", 0.1)],
    "review": [("VERB", 0.6), ("NOUN", 0.4)],
    "stream": [("VERB", 0.55), ("NOUN", 0.45)],
    "mock": [("VERB", 0.7), ("ADJ", 0.3)],
    "dread": [("VERB", 0.6), ("NOUN", 0.4)],
    "kid": [("NOUN", 0.9), ("VERB", 0.1)],
}

# Common English words known only to the tagger (no vectors).
EXTRA_LEXICON = {
    "NOUN": "time person way thing world life hand part child eye woman man place work case point government company number group problem fact house money water room".split(),
    "VERB": "be have do say get make go know take think come give look use find tell ask work seem feel try leave call want pet bite bites bark".split(),
    "ADJ": "other same few public bad able sure happy important different".split(),
    "ADV": "not also just now then here there when only still even never always".split(),
    "PRON": "me him her us them what who which".split(),
    "PREP": "into over after under between through during without".split(),
    "CONJ": "because if while although".split(),
    "DET": "some any no each all both".split(),
}

SUFFIX_RULES = [
    ("ly", "ADV"), ("ness", "NOUN"), ("ment", "NOUN"), ("tion", "NOUN"), ("sion", "NOUN"),
    ("ity", "NOUN"), ("ship", "NOUN"), ("ism", "NOUN"), ("ist", "NOUN"), ("ous", "ADJ"),
    ("ful", "ADJ"), ("less", "ADJ"), ("able", "ADJ"), ("ible", "ADJ"), ("ive", "ADJ"),
    ("ish", "ADJ"), ("ical", "ADJ"), ("ize", "VERB"), ("ise", "VERB"), ("ify", "VERB"),
    ("ate", "VERB"), ("ing", "VERB"), ("ed", "VERB"), ("er", "NOUN"), ("s", "NOUN"),
]

SYNONYMS = {
    "good": ["fine", "solid"], "great": ["terrific"], "bad": ["poor", "lousy"],
    "awful": ["dreadful", "terrible"], "boring": ["tedious", "dull"], "film": ["movie"],
    "movie": ["film"], "story": ["narrative"], "love": ["adore"], "hate": ["despise", "loathe"],
    "funny": ["witty"], "beautiful": ["lovely"], "actor": ["star"], "plot": ["premise"],
}


def words(group):
    return GROUPS[group][2]


def build_vectors(rng):
    axis = rng.normal(size=DIM)
    axis /= np.linalg.norm(axis)
    centroids = {}
    vectors = {}
    order = []
    for name, (tag, pol, ws) in GROUPS.items():
        key = CENTROID_OF.get(name, name)
        if key not in centroids:
            c = rng.normal(size=DIM)
            c -= c.dot(axis) * axis
            centroids[key] = 2.2 * c / np.linalg.norm(c)
        for w in ws:
            v = centroids[key] + pol * 1.15 * axis + rng.normal(scale=0.42, size=DIM)
            vectors[w] = v
            order.append(w)
    return order, vectors


def pick(r, group):
    return r.choice(words(group))


def polar(r, kind, pol):
    return pick(r, f"{kind}_{'pos' if pol > 0 else 'neg'}")


def sentence(r):
    pol = r.choice([1, -1])
    t = r.randrange(12)
    fn = lambda: pick(r, "noun_film")
    link = lambda: pick(r, "verb_link")
    adv = lambda: (pick(r, "adv") + " ") if r.random() < 0.4 else ""
    if t == 0:
        s = f"The {fn()} {link()} {adv()}{polar(r, 'adj', pol)}."
    elif t == 1:
        s = f"I {polar(r, 'verb', pol)} this {fn()}."
    elif t == 2:
        s = f"{r.choice(['We', 'They', 'You'])} will {polar(r, 'verb', pol)} the {fn()} and the {fn()}."
    elif t == 3:
        s = f"This {pick(r, 'adj_neu')} {fn()} is a {polar(r, 'adj', pol)} {fn()}."
    elif t == 4:
        s = f"The {fn()} is a {adv()}{polar(r, 'adj', pol)} {polar(r, 'noun', pol)}."
    elif t == 5:
        s = f"A {polar(r, 'adj', pol)} {fn()} with a {polar(r, 'adj', pol)} {fn()}."
    elif t == 6:
        s = (f"We {pick(r, 'verb_neu')} the {pick(r, 'adj_neu')} {fn()} last "
             f"{pick(r, 'noun_time')} and it {link()} {polar(r, 'adj', pol)}.")
    elif t == 7:
        other = -pol
        s = (f"The {fn()} {link()} {polar(r, 'adj', other)} but the {fn()} "
             f"{link()} {adv()}{polar(r, 'adj', pol)}.")
    elif t == 8:
        s = f"The {pick(r, 'noun_people')} {link()} {polar(r, 'adj', pol)} in this {pick(r, 'adj_neu')} {fn()}."
    elif t == 9:
        s = f"My {pick(r, 'noun_animal')} would {polar(r, 'verb', pol)} this {fn()}."
    elif t == 10:
        s = f"What a {polar(r, 'adj', pol)} {polar(r, 'noun', pol)} of a {fn()}!"
    else:
        s = f"The {pick(r, 'noun_people')} will {polar(r, 'verb', pol)} the {fn()} on the {pick(r, 'noun_object')}."
    label = 1 if pol > 0 else 0
    return s, label


def main():
    rng = np.random.default_rng(SEED)
    r = random.Random(SEED)
    os.makedirs(OUT, exist_ok=True)

    order, vectors = build_vectors(rng)
    with open(os.path.join(OUT, "embeddings.txt"), "w", encoding="utf-8") as f:
        f.write(f"{len(order)} {DIM}\n")
        for w in order:
            f.write(w + " " + " ".join(f"{x:.5f}" for x in vectors[w]) + "\n")

    lex = {}
    for name, (tag, _, ws) in GROUPS.items():
        for w in ws:
            lex.setdefault(w, [(tag, 1.0)])
    for tag, ws in EXTRA_LEXICON.items():
        for w in ws:
            lex.setdefault(w, [(tag, 1.0)])
    lex.update(AMBIGUOUS)
    with open(os.path.join(OUT, "pos_lexicon.tsv"), "w", encoding="utf-8") as f:
        for w in sorted(lex):
            f.write(w + "\t" + ",".join(f"{t}:{p:g}" for t, p in lex[w]) + "\n")

    with open(os.path.join(OUT, "suffix_rules.tsv"), "w", encoding="utf-8") as f:
        for suf, tag in SUFFIX_RULES:
            f.write(f"{suf}\t{tag}\n")

    with open(os.path.join(OUT, "synonyms.tsv"), "w", encoding="utf-8") as f:
        for w in sorted(SYNONYMS):
            f.write(w + "\t" + ",".join(SYNONYMS[w]) + "\n")

    seen = set()
    rows = []
    while len(rows) < 1500:
        s, label = sentence(r)
        if s.lower() in seen:
            continue
        seen.add(s.lower())
        if r.random() < 0.05:
            label = 1 - label
        rows.append((label, s))
    with open(os.path.join(OUT, "polarity.csv"), "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["label", "text"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
