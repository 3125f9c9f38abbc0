"""Independent reference computations used by the tests.

Nothing here imports the package; every value is recomputed from raw inputs.
"""
from fractions import Fraction
import random

# Term lists transcribed by hand for counting.
FEMALE_LIST = """aunt, bride, businesswoman, daughter, daughters, fiancee, fiancée, gal, gals,
girl, girlfriend, girls, grandmother, her, herself, lady, landlady, mama, mom, mother, queen,
she, sister, sisters, spokeswoman, wife, woman, women, womens"""
MALE_LIST = """boy, boyfriend, boys, brother, brothers, businessman, dad, dude, dudes, father,
fiance, fiancé, gentleman, grandfather, groom, guy, he, him, himself, his, husband, king,
landlord, man, men, mens, papa, son, sons, spokesman, uncle"""
NEUTRAL_LIST = """businessperson, child, childs, grandparent, kid, kids, landlord, monarch,
newlywed, parent, partner, pbling, people, person, sibling, siblings, someone, spokesperson,
spouse, their, them, themself, they"""


def split_terms(text):
    return [t.strip() for t in text.replace("\n", " ").split(",") if t.strip()]


# --------------------------------------------------------------------------
# bias amplification by direct probability counting


def brute_biasamp(n_groups, n_tasks, records, direction, reference=None):
    """Aggregate BiasAmp from raw records.

    ``records``: list of (gold_attrs, gold_tasks, pred_attrs, pred_tasks) with
    index sets.  ``reference``: list of (attrs, tasks) training records that
    decide correlation signs (default: the gold side of ``records``).
    Returns ``(aggregate, per_pair)`` where per_pair maps (a, t) -> contribution.
    """
    ref = reference if reference is not None else [(r[0], r[1]) for r in records]
    n_ref = len(ref)
    n = len(records)
    contributions = {}
    for a in range(n_groups):
        for t in range(n_tasks):
            p_a = Fraction(sum(1 for at, _ in ref if a in at), n_ref)
            p_t = Fraction(sum(1 for _, ts in ref if t in ts), n_ref)
            p_at = Fraction(sum(1 for at, ts in ref if a in at and t in ts), n_ref)
            y = 1 if p_at > p_a * p_t else 0
            if direction == "A->T":
                cond = [r for r in records if a in r[0]]
                if not cond:
                    continue
                data = Fraction(sum(1 for r in cond if t in r[1]), len(cond))
                pred = Fraction(sum(1 for r in cond if t in r[3]), len(cond))
            else:
                cond = [r for r in records if t in r[1]]
                if not cond:
                    continue
                data = Fraction(sum(1 for r in cond if a in r[0]), len(cond))
                pred = Fraction(sum(1 for r in cond if a in r[2]), len(cond))
            delta = pred - data
            contributions[a, t] = y * delta - (1 - y) * delta
    assert n > 0
    if not contributions:
        return None, {}
    agg = sum(contributions.values(), Fraction(0)) / len(contributions)
    return float(agg), {k: float(v) for k, v in contributions.items()}


def random_records(rng, n_groups=3, max_tasks=5, max_records=200, noisy=True):
    n_tasks = rng.randint(1, max_tasks)
    recs = []
    for _ in range(rng.randint(1, max_records)):
        ga = {rng.randrange(n_groups)}
        gt = {t for t in range(n_tasks) if rng.random() < 0.4}
        if noisy:
            pa = {rng.randrange(n_groups)} if rng.random() < 0.3 else set(ga)
            pt = {t for t in range(n_tasks) if rng.random() < 0.4} if rng.random() < 0.3 else set(gt)
        else:
            pa, pt = set(ga), set(gt)
        recs.append((ga, gt, pa, pt))
    return n_tasks, recs


# --------------------------------------------------------------------------
# captions


def simple_tokens(text):
    """Lowercased word tokens: runs of alphanumerics/underscore, joined by
    single apostrophes that sit between two such characters."""
    out, cur = [], []
    word = lambda ch: ch.isalnum() or ch == "_"
    i = 0
    while i < len(text):
        ch = text[i]
        if word(ch):
            cur.append(ch)
        elif ch in "'’" and cur and i + 1 < len(text) and word(text[i + 1]):
            cur.append(ch)
        elif cur:
            out.append("".join(cur).lower())
            cur = []
        i += 1
    if cur:
        out.append("".join(cur).lower())
    return out


def oracle_class(token, female, male, neutral):
    """Class of a token under the default conflict policy (neutral wins)."""
    for cand in (token, token[:-2] if token.endswith(("'s", "’s")) else None):
        if cand is None:
            continue
        if cand in neutral:
            return "Neutral"
        if cand in male:
            return "Male"
        if cand in female:
            return "Female"
    return "Other"


def oracle_hits(text):
    female, male, neutral = (set(split_terms(x)) for x in (FEMALE_LIST, MALE_LIST, NEUTRAL_LIST))
    counts = {"Male": 0, "Female": 0, "Neutral": 0, "Other": 0}
    for tok in simple_tokens(text):
        counts[oracle_class(tok, female, male, neutral)] += 1
    return counts["Male"], counts["Female"], counts["Neutral"]


def majority_label(per_caption_counts):
    """Image label from per-caption (male, female, neutral) hit counts."""
    n = len(per_caption_counts)
    male_caps = sum(1 for m, _, _ in per_caption_counts if m > 0)
    female_caps = sum(1 for _, f, _ in per_caption_counts if f > 0)
    any_male, any_female = male_caps > 0, female_caps > 0
    total = sum(m + f + x for m, f, x in per_caption_counts)
    if total == 0:
        return "Discarded", "no-person"
    if 2 * male_caps > n:
        return ("Male", None) if not any_female else ("Discarded", "mixed")
    if 2 * female_caps > n:
        return ("Female", None) if not any_male else ("Discarded", "mixed")
    return "Neutral", None


SUBJECTS = ["man", "woman", "boy", "girl", "person", "lady", "guy", "mother", "father",
            "child", "Bride", "groom", "king", "queen", "People", "He", "She", "A dude",
            "the brothers", "his son", "her daughter", "the landlord", "Men", "Women"]
VERBS = ["walking", "holding", "riding", "eating", "watching", "sitting with", "throwing",
         "looking at", "playing with", "carrying"]
OBJECTS = ["her dog", "his bike", "a pizza", "the kite", "her", "him", "them", "a frisbee",
           "their umbrella", "the boy's ball", "a woman's bag", "her phone", "his own hat",
           "a cake", "the horse"]
TAILS = ["", " in the park", " on a street", ", while her friend waits", " near him",
         " next to his wife", ". She smiles", " at the beach"]


def caption_grammar(rng: random.Random):
    subj = rng.choice(SUBJECTS)
    text = f"{subj} {rng.choice(VERBS)} {rng.choice(OBJECTS)}{rng.choice(TAILS)}"
    if rng.random() < 0.5:
        text = "A " + text[0].lower() + text[1:]
    if rng.random() < 0.5:
        text += rng.choice([".", "!", "", " ."])
    return text[0].upper() + text[1:]


def linear_ramp_mean(p_start, p_end, steps):
    return sum(p_start + (p_end - p_start) * i / (steps - 1) for i in range(steps)) / steps
