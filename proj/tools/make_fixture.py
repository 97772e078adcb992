#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Generates the pre-tagged E2E-style fixture corpus.

Meaning representations follow the E2E restaurant schema. References are
produced by a stochastic phrase grammar whose tokens carry a lemma and a
Universal POS tag (AUX folded into VERB, punctuation already trimmed), so the
output is exactly what the tagging tool would emit for real data.

Records sharing a meaning representation are written consecutively, the way
the official release lists them. Output is deterministic for a given seed.
"""

import argparse
import json
import random

NAMES = [
    "Bibimbap House", "The Golden Curry", "The Eagle", "Alimentum", "Aromi", "Blue Spice",
    "Browns Cambridge", "Clowns", "Cocum", "Cotto", "Fitzbillies", "Giraffe", "Green Man",
    "Loch Fyne", "Midsummer House", "Strada", "Taste of Cambridge", "The Cambridge Blue",
    "The Cricketers", "The Dumpling Tree", "The Mill", "The Olive Grove", "The Phoenix",
    "The Plough", "The Punter", "The Rice Boat", "The Twenty Two", "The Vaults",
    "The Waterman", "The Wrestlers", "Wildwood", "Zizzi",
]
NEAR = [
    "Clare Hall", "Café Adriatic", "Café Brazil", "Café Rouge", "Café Sicilia",
    "Crowne Plaza Hotel", "Express by Holiday Inn", "All Bar One", "Avalon", "Burger King",
    "Raja Indian Cuisine", "Rainbow Vegetarian Café", "Ranch", "The Bakers",
    "The Portland Arms", "The Sorrento", "Yippee Noodle Bar", "The Six Bells", "The Rice Boat",
]
EAT_TYPES = ["restaurant", "pub", "coffee shop"]
FOODS = ["English", "Italian", "French", "Chinese", "Indian", "Japanese", "Fast food"]
PRICES = ["cheap", "moderate", "high", "less than £20", "£20-25", "more than £30"]
RATINGS = ["low", "average", "high", "1 out of 5", "3 out of 5", "5 out of 5"]
AREAS = ["riverside", "city centre"]
FAMILY = ["yes", "no"]

# Tokens are written "lemma/UPOS", space separated.


def toks(pattern):
    return [tuple(t.rsplit("/", 1)) for t in pattern.split()]


def name_tokens(value):
    out = []
    for w in value.split():
        lw = w.lower()
        out.append((lw, "DET" if lw == "the" else "ADP" if lw in ("by", "of") else "PROPN"))
    return out


EAT = {"restaurant": ["restaurant/NOUN", "restaurant/NOUN", "eatery/NOUN", "place/NOUN"],
       "pub": ["pub/NOUN", "pub/NOUN", "bar/NOUN"],
       "coffee shop": ["coffee/NOUN shop/NOUN", "coffee/NOUN shop/NOUN", "café/NOUN"]}

FOOD_ADJ = {"English": "english/ADJ", "Italian": "italian/ADJ", "French": "french/ADJ",
            "Chinese": "chinese/ADJ", "Indian": "indian/ADJ", "Japanese": "japanese/ADJ",
            "Fast food": "fast/ADJ food/NOUN"}


def food_clause(v):
    adj = FOOD_ADJ[v]
    base = adj if v == "Fast food" else adj + " food/NOUN"
    return random.choice([
        "that/PRON serve/VERB " + base,
        "which/PRON serve/VERB " + base,
        "serve/VERB " + base,
        "that/PRON offer/VERB " + base,
        "provide/VERB " + base,
        "that/PRON specialise/VERB in/ADP " + base,
        "with/ADP " + base + ("" if v == "Fast food" else " on/ADP the/DET menu/NOUN"),
    ])


def food_sentence(v):
    adj = FOOD_ADJ[v]
    base = adj if v == "Fast food" else adj + " food/NOUN"
    return random.choice([
        "it/PRON serve/VERB " + base,
        "they/PRON serve/VERB " + base,
        "it/PRON offer/VERB " + base,
        base + " be/VERB serve/VERB there/ADV",
        "the/DET menu/NOUN feature/VERB " + base,
    ])


PRICE_ADJ = {"cheap": ["cheap/ADJ", "inexpensive/ADJ", "low/ADV price/VERB"],
             "moderate": ["moderately/ADV price/VERB", "moderate/ADJ price/VERB", "mid/ADJ range/NOUN"],
             "high": ["expensive/ADJ", "pricey/ADJ", "high/ADV price/VERB"]}


def price_clause(v):
    if v in ("cheap", "moderate", "high"):
        word = {"cheap": "cheap/ADJ", "moderate": "moderate/ADJ", "high": "high/ADJ"}[v]
        return random.choice([
            "in/ADP the/DET " + word + " price/NOUN range/NOUN",
            "with/ADP " + word + " price/NOUN",
            "with/ADP a/DET " + word + " price/NOUN range/NOUN",
        ])
    amount = {"less than £20": "less/ADJ than/ADP £/SYM 20/NUM",
              "£20-25": "£/SYM 20/NUM to/ADP 25/NUM",
              "more than £30": "more/ADJ than/ADP £/SYM 30/NUM"}[v]
    return random.choice([
        "with/ADP price/NOUN " + amount,
        "in/ADP the/DET " + amount + " price/NOUN range/NOUN",
        "where/ADV meal/NOUN cost/VERB " + amount,
    ])


def price_sentence(v):
    if v in ("cheap", "moderate", "high"):
        adj = random.choice(PRICE_ADJ[v])
        return random.choice([
            "it/PRON be/VERB " + adj,
            "the/DET price/NOUN be/VERB " + {"cheap": "low/ADJ", "moderate": "average/ADJ", "high": "high/ADJ"}[v],
            "price/NOUN be/VERB " + {"cheap": "very/ADV low/ADJ", "moderate": "quite/ADV reasonable/ADJ",
                                     "high": "rather/ADV high/ADJ"}[v],
        ])
    return "it/PRON be/VERB " + price_clause(v)


RATING_WORD = {"low": "low/ADJ", "average": "average/ADJ", "high": "high/ADJ"}


def rating_clause(v):
    if v in RATING_WORD:
        w = RATING_WORD[v]
        adv = {"low": "poorly/ADV", "average": "averagely/ADV", "high": "highly/ADV"}[v]
        return random.choice([
            "with/ADP a/DET " + w + " customer/NOUN rating/NOUN",
            "that/PRON have/VERB a/DET " + w + " customer/NOUN rating/NOUN",
            "which/PRON be/VERB " + adv + " rate/VERB",
            adv + " rate/VERB by/ADP customer/NOUN",
        ])
    score = v.split()[0]
    return random.choice([
        "with/ADP a/DET rating/NOUN of/ADP " + score + "/NUM out/ADP of/ADP 5/NUM",
        "rate/VERB " + score + "/NUM out/ADP of/ADP 5/NUM",
        "with/ADP a/DET customer/NOUN rating/NOUN of/ADP " + score + "/NUM out/ADP of/ADP 5/NUM",
    ])


def rating_sentence(v):
    if v in RATING_WORD:
        w = RATING_WORD[v]
        return random.choice([
            "it/PRON have/VERB a/DET " + w + " customer/NOUN rating/NOUN",
            "customer/NOUN rate/VERB it/PRON " + w,
            "its/PRON customer/NOUN rating/NOUN be/VERB " + w,
        ])
    score = v.split()[0]
    return random.choice([
        "it/PRON be/VERB rate/VERB " + score + "/NUM out/ADP of/ADP 5/NUM",
        "customer/NOUN give/VERB it/PRON " + score + "/NUM out/ADP of/ADP 5/NUM",
        "it/PRON have/VERB a/DET rating/NOUN of/ADP " + score + "/NUM out/ADP of/ADP 5/NUM",
    ])


def area_clause(v):
    if v == "riverside":
        return random.choice([
            "in/ADP the/DET riverside/NOUN area/NOUN",
            "by/ADP the/DET river/NOUN",
            "on/ADP the/DET riverside/NOUN",
            "locate/VERB by/ADP the/DET riverside/NOUN",
        ])
    return random.choice([
        "in/ADP the/DET city/NOUN centre/NOUN",
        "in/ADP the/DET centre/NOUN of/ADP the/DET city/NOUN",
        "locate/VERB in/ADP the/DET city/NOUN centre/NOUN",
        "in/ADP the/DET heart/NOUN of/ADP the/DET city/NOUN",
    ])


def family_clause(v):
    if v == "yes":
        return random.choice([
            "that/PRON be/VERB family/NOUN friendly/ADJ",
            "which/PRON be/VERB kid/NOUN friendly/ADJ",
            "that/PRON welcome/VERB family/NOUN",
            "suitable/ADJ for/ADP child/NOUN",
        ])
    return random.choice([
        "that/PRON be/VERB not/PART family/NOUN friendly/ADJ",
        "which/PRON do/VERB not/PART welcome/VERB child/NOUN",
        "not/PART suitable/ADJ for/ADP family/NOUN",
    ])


def family_sentence(v):
    if v == "yes":
        return random.choice([
            "it/PRON be/VERB family/NOUN friendly/ADJ",
            "it/PRON be/VERB very/ADV child/NOUN friendly/ADJ",
            "family/NOUN be/VERB welcome/ADJ",
            "child/NOUN be/VERB always/ADV welcome/ADJ",
        ])
    return random.choice([
        "it/PRON be/VERB not/PART family/NOUN friendly/ADJ",
        "it/PRON be/VERB not/PART really/ADV child/NOUN friendly/ADJ",
        "child/NOUN be/VERB not/PART welcome/ADJ",
        "it/PRON do/VERB not/PART cater/VERB for/ADP family/NOUN",
    ])


def near_clause(v):
    lead = random.choice(["near/ADP", "near/ADP", "close/ADV to/ADP", "not/PART far/ADV from/ADP",
                          "next/ADV to/ADP", "locate/VERB near/ADP"])
    return toks(lead) + name_tokens(v)


CLAUSES = {"food": food_clause, "priceRange": price_clause, "customerRating": rating_clause,
           "area": area_clause, "familyFriendly": family_clause}
SENTENCES = {"food": food_sentence, "priceRange": price_sentence, "customerRating": rating_sentence,
             "area": lambda v: "it/PRON be/VERB " + area_clause(v), "familyFriendly": family_sentence}


def realize(mr):
    slots = dict(mr)
    out = []
    eat = toks(random.choice(EAT[slots["eatType"]])) if "eatType" in slots else toks(
        random.choice(["place/NOUN", "venue/NOUN", "establishment/NOUN"]))
    pre = []
    rest = [s for s in ("food", "priceRange", "customerRating", "area", "familyFriendly") if s in slots]
    random.shuffle(rest)
    # Occasionally fold price or food into the noun phrase.
    if "priceRange" in rest and slots["priceRange"] in PRICE_ADJ and random.random() < 0.5:
        pre += toks(random.choice(PRICE_ADJ[slots["priceRange"]]))
        rest.remove("priceRange")
    if "familyFriendly" in rest and slots["familyFriendly"] == "yes" and random.random() < 0.3:
        pre += toks(random.choice(["family/NOUN friendly/ADJ", "kid/NOUN friendly/ADJ"]))
        rest.remove("familyFriendly")
    if "food" in rest and random.random() < 0.4:
        pre += toks(FOOD_ADJ[slots["food"]])
        rest.remove("food")
    det = toks("an/DET" if pre and pre[0][0][0] in "aeiou" or (not pre and eat[0][0][0] in "aeiou") else "a/DET")
    np_ = det + pre + eat
    name = name_tokens(slots["name"])
    opening = random.random()
    if opening < 0.55:
        out += name + toks("be/VERB") + np_
    elif opening < 0.75:
        out += toks("there/PRON be/VERB") + np_ + toks(random.choice(["call/VERB", "name/VERB"])) + name
    elif opening < 0.9:
        out += name + np_ if random.random() < 0.5 else name + toks("be/VERB") + np_
    else:
        out += toks(random.choice(["if/SCONJ you/PRON want/VERB", "for/ADP"])) + np_ + toks(
            "try/VERB" if random.random() < 0.5 else "visit/VERB") + name
    near_done = False
    if "near" in slots and random.random() < 0.5:
        out += near_clause(slots["near"])
        near_done = True
    # First one or two slots as relative clauses, the rest as follow-up sentences.
    inline = random.choice([1, 2, 2, 3])
    for k, slot in enumerate(rest):
        if k < inline:
            if k > 0:
                out += toks("and/CCONJ")
            out += toks(CLAUSES[slot](slots[slot]))
        else:
            if random.random() < 0.3 and k > inline:
                out += toks("and/CCONJ")
            out += toks(SENTENCES[slot](slots[slot]))
    if "near" in slots and not near_done:
        out += toks(random.choice(["it/PRON be/VERB", "you/PRON can/VERB find/VERB it/PRON"]))
        out += near_clause(slots["near"])
    return out


def random_mr():
    mr = [("name", random.choice(NAMES))]
    optional = [("eatType", EAT_TYPES), ("food", FOODS), ("priceRange", PRICES),
                ("customer rating", RATINGS), ("area", AREAS), ("familyFriendly", FAMILY)]
    k = random.choice([2, 2, 3, 3, 3, 4, 4, 5])
    chosen = sorted(random.sample(range(len(optional)), k))
    for i in chosen:
        mr.append((optional[i][0], random.choice(optional[i][1])))
    if random.random() < 0.4:
        mr.append(("near", random.choice([n for n in NEAR if n != mr[0][1]])))
    return tuple(mr)


def generate(n_records, seed, exclude=frozenset()):
    random.seed(seed)
    records, seen = [], set(exclude)
    while len(records) < n_records:
        mr = random_mr()
        if mr in seen:
            continue
        seen.add(mr)
        refs = random.choice([1, 2, 3, 3, 4, 5, 6])
        for _ in range(min(refs, n_records - len(records))):
            canon = [("customerRating" if s == "customer rating" else s, v) for s, v in mr]
            ref = realize(canon)
            records.append({"mr": [list(p) for p in mr], "ref": [list(t) for t in ref]})
    return records, seen


def write(path, records, note):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps({"_meta": {"source": "synthetic E2E-style grammar", "note": note}},
                           ensure_ascii=False) + "\n")
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="data")
    ap.add_argument("--seed", type=int, default=2018)
    args = ap.parse_args()
    train, seen = generate(2000, args.seed)
    test, _ = generate(400, args.seed + 1, exclude=frozenset(seen))
    write(f"{args.out_dir}/e2e_fixture.tagged.jsonl", train, "2000-record training fixture")
    write(f"{args.out_dir}/e2e_fixture_test.tagged.jsonl", test, "400-record test fixture, MRs disjoint from training")
    write(f"{args.out_dir}/e2e_fixture_100.tagged.jsonl", train[:100], "first 100 training records")


if __name__ == "__main__":
    main()
