#!/usr/bin/env python3
"""Generate the synthetic fixture corpus under data/fixture/.

Usage: python3 tools/make_fixture.py [--out data/fixture] [--seed 7]

Posts are bags of words drawn from per-class and per-community vocabularies
mixed with shared filler, so the local embedder separates classes while
communities of one class overlap.
"""

import argparse
import csv
import json
import random
from pathlib import Path

CUTOFF = 1663200000  # 2022-09-15T00:00:00Z
DAY = 86400

COMMUNITIES = [
    # name, distilled, iup, category, subclass
    ("r/ADHD", 31, True, "Disorder", "ADHD"),
    ("r/adhdwomen", 28, False, "Disorder", "ADHD"),
    ("r/depression", 29, True, "Disorder", "Depression"),
    ("r/depressed", 30, False, "Disorder", "Depression"),
    ("r/depressionregimen", 28, False, "Disorder", "Depression"),
    ("r/bpd", 33, True, "Disorder", "Borderline Personality Disorder (BPD)"),
    ("r/BorderlinePDisorder", 25, False, "Disorder", "Borderline Personality Disorder (BPD)"),
    ("r/AnorexiaNervosa", 20, False, "Disorder", "Eating Disorders"),
    ("r/BingeEatingDisorder", 23, False, "Disorder", "Eating Disorders"),
    ("r/bulimia", 19, True, "Disorder", "Eating Disorders"),
    ("r/narcissism", 29, True, "Disorder", "Narcissistic Personality Disorder (NPD)"),
    ("r/NPD", 25, False, "Disorder", "Narcissistic Personality Disorder (NPD)"),
    ("r/aspd", 16, True, "Disorder", "Antisocial Personality Disorder (ASPD)"),
    ("r/alcoholism", 26, True, "Disorder", "Substance Use Disorder"),
    ("r/addiction", 28, False, "Disorder", "Substance Use Disorder"),
    ("r/alcoholicsanonymous", 23, False, "Disorder", "Substance Use Disorder"),
    ("r/cripplingalcoholism", 34, False, "Disorder", "Substance Use Disorder"),
    ("r/bipolar2", 20, False, "Disorder", "Bipolar Disorder"),
    ("r/BipolarReddit", 24, False, "Disorder", "Bipolar Disorder"),
    ("r/bipolar", 21, True, "Disorder", "Bipolar Disorder"),
    ("r/autism", 21, True, "Disorder", "Autism"),
    ("r/aspergers", 28, False, "Disorder", "Autism"),
    ("r/Anxiety", 24, True, "Disorder", "Anxiety"),
    ("r/Agoraphobia", 27, False, "Disorder", "Anxiety"),
    ("r/Anxietyhelp", 18, False, "Disorder", "Anxiety"),
    ("r/OCD", 26, True, "Disorder", "Obsessive Compulsive Disorder (OCD)"),
    ("r/ptsd", 33, True, "Disorder", "Post-Traumatic Stress Disorder (PTSD)"),
    ("r/CPTSD", 38, True, "Disorder", "Complex Post-Traumatic Stress Disorder (CPTSD)"),
    ("r/Suicidal_Thoughts", 21, False, "Disorder", "Suicidality"),
    ("r/SuicideWatch", 26, True, "Disorder", "Suicidality"),
    ("r/schizoaffective", 20, True, "Disorder", "Schizophrenia/Schizoaffective"),
    ("r/schizophrenia", 17, True, "Disorder", "Schizophrenia/Schizoaffective"),
    ("r/Schizotypal", 27, True, "Disorder", "Schizotypal Personality Disorder"),
    ("r/Schizoid", 28, True, "Disorder", "Schizoid Personality Disorder"),
    ("r/NoNewNormal", 10, False, "Misinformation", None),
    ("r/ivermectin", 10, False, "Misinformation", None),
    ("r/vaccinelonghaulers", 21, False, "Misinformation", None),
    ("r/conspiracy", 9, False, "Misinformation", None),
    ("r/greatawakening", 15, False, "Misinformation", None),
    ("r/MGTOW", 11, False, "HateSpeech", None),
    ("r/Incels", 10, False, "HateSpeech", None),
    ("r/TruFemcels", 23, False, "HateSpeech", None),
    ("r/Gender_Critical", 10, False, "HateSpeech", None),
    ("r/KotakuInAction", 11, False, "HateSpeech", None),
    ("r/MensRights", 21, False, "HateSpeech", None),
    ("r/TheRedPill", 124, False, "HateSpeech", None),
    ("r/CringeAnarchy", 4, False, "HateSpeech", None),
    ("r/Chodi", 4, False, "HateSpeech", None),
    ("r/Teenagers", 6, True, "Control", None),
    ("r/ShowerThoughts", 4, True, "Control", None),
    ("r/apple", 11, True, "Control", None),
    ("r/ApplyingToCollege", 16, True, "Control", None),
    ("r/Agriculture", 6, True, "Control", None),
    ("r/askscience", 12, True, "Control", None),
]

THEMES = {
    "ADHD": "focus distracted hyperfocus adderall procrastinate forgetful deadlines executive dysfunction stimulant fidget late",
    "Depression": "hopeless empty numb sad tired worthless sleep crying motivation lonely dark heavy",
    "Borderline Personality Disorder (BPD)": "abandonment splitting favorite person rage emptiness unstable relationships dbt impulsive fear identity",
    "Eating Disorders": "calories binge purge restrict weight meal body scale fasting relapse food recovery",
    "Narcissistic Personality Disorder (NPD)": "supply admiration grandiose ego validation superior envy image status entitled attention praise",
    "Antisocial Personality Disorder (ASPD)": "manipulate remorse rules consequences lying thrill boredom charm cold exploit risk guilt",
    "Substance Use Disorder": "drinking sober relapse withdrawal craving vodka meeting sponsor days clean hangover beer",
    "Bipolar Disorder": "manic mania hypomania episode lithium mood stabilizer crash lamictal swings energy spending",
    "Autism": "sensory meltdown stimming routine autistic masking overload diagnosis special interest noise social",
    "Anxiety": "panic attack worry heart racing nervous anxious breathing fear dread shaking calm",
    "Obsessive Compulsive Disorder (OCD)": "intrusive compulsion checking rituals reassurance contamination obsession erp thoughts washing doubt certainty",
    "Post-Traumatic Stress Disorder (PTSD)": "flashback trauma nightmares triggered veteran hypervigilant startle combat emdr memories assault safety",
    "Complex Post-Traumatic Stress Disorder (CPTSD)": "childhood abuse parents neglect inner child flashback attachment emotional shame healing narcissistic mother",
    "Suicidality": "suicide ending goodbye pain note hotline die living plan tonight burden alive",
    "Schizophrenia/Schizoaffective": "voices hallucinations paranoia psychosis antipsychotic delusions hearing clozapine abilify episode reality schizophrenic",
    "Schizotypal Personality Disorder": "magical thinking odd beliefs eccentric signs omens strange perceptions suspicious peculiar social detached",
    "Schizoid Personality Disorder": "alone solitude indifferent detached apathy hobbies isolation emotionless content distance introvert uninterested",
    "Misinformation": "vaccine mandate plandemic ivermectin lockdown mainstream media truth agenda freedom cabal censorship",
    "HateSpeech": "women feminists hypergamy chad females alpha beta redpill men rights degenerates cucks",
    "Control": "phone college school science question homework iphone farm crops physics weekend game",
}

# Shared vocabulary between related classes, so the graph has bridges.
NEIGHBOURS = {
    "Depression": ["Suicidality", "Bipolar Disorder"],
    "Suicidality": ["Depression"],
    "Bipolar Disorder": ["Depression"],
    "Borderline Personality Disorder (BPD)": ["Complex Post-Traumatic Stress Disorder (CPTSD)"],
    "Complex Post-Traumatic Stress Disorder (CPTSD)": ["Post-Traumatic Stress Disorder (PTSD)"],
    "Post-Traumatic Stress Disorder (PTSD)": ["Complex Post-Traumatic Stress Disorder (CPTSD)"],
    "Anxiety": ["Obsessive Compulsive Disorder (OCD)"],
    "Obsessive Compulsive Disorder (OCD)": ["Anxiety"],
    "Autism": ["ADHD"],
    "ADHD": ["Autism"],
    "Schizophrenia/Schizoaffective": ["Schizotypal Personality Disorder"],
    "Schizotypal Personality Disorder": ["Schizophrenia/Schizoaffective"],
    "Schizoid Personality Disorder": ["Schizotypal Personality Disorder"],
    "Narcissistic Personality Disorder (NPD)": ["Antisocial Personality Disorder (ASPD)"],
    "Antisocial Personality Disorder (ASPD)": ["Narcissistic Personality Disorder (NPD)"],
    "HateSpeech": ["Narcissistic Personality Disorder (NPD)", "Antisocial Personality Disorder (ASPD)",
                   "Schizoid Personality Disorder"],
    "Misinformation": ["Schizotypal Personality Disorder", "Anxiety"],
}

FILLER = ("i the a to and it my me is that of in for this just have but so do be "
          "not with was like feel know what really about when get can all one "
          "people time day think even out some would how now because any").split()


def community_words(rng, name):
    base = name.split("/", 1)[1].lower()
    letters = "abcdefghijklmnopqrstuvwxyz"
    return [base] + ["".join(rng.choice(letters) for _ in range(rng.randint(4, 8))) for _ in range(6)]


def phrases(words, size):
    return [" ".join(words[i:i + size]) for i in range(0, len(words) - size + 1, size)]


FILLER_PHRASES = phrases(FILLER, 3)


def make_text(rng, theme, near, local, n):
    """About n words of stock phrases; fixed word pairs keep bigram features stable."""
    theme_p, near_p = phrases(theme, 2), phrases(near, 2)
    parts, count = [], 0
    while count < n:
        r = rng.random()
        if r < 0.4:
            p = rng.choice(theme_p)
        elif r < 0.5 and near_p:
            p = rng.choice(near_p)
        elif r < 0.6:
            p = rng.choice(local)
        else:
            p = rng.choice(FILLER_PHRASES)
        parts.append(p)
        count += p.count(" ") + 1
    return " ".join(parts)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/fixture")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--posts", type=int, default=44, help="posts per community before the cutoff")
    args = ap.parse_args()
    rng = random.Random(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = [{"name": n, "category": c, "subclass": s, "iup": iup, "distilled": d}
            for n, d, iup, c, s in COMMUNITIES]
    (out / "registry.json").write_text(json.dumps(rows, indent=2) + "\n")
    with open(out / "registry.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["name", "category", "subclass", "iup", "distilled"])
        for r in rows:
            w.writerow([r["name"], r["category"], r["subclass"] or "", "Yes" if r["iup"] else "No", r["distilled"]])

    lines = []
    next_id = 0

    def new_id():
        nonlocal next_id
        next_id += 1
        return "p%05d" % next_id

    for name, _, _, category, subclass in COMMUNITIES:
        theme = THEMES[subclass or category].split()
        near = [w for k in NEIGHBOURS.get(subclass or category, []) for w in THEMES[k].split()]
        local = community_words(rng, name)
        sub = name.split("/", 1)[1]
        stamps = sorted((CUTOFF - rng.randint(0, 60 * DAY) for _ in range(args.posts)), reverse=True)
        stamps += [CUTOFF + rng.randint(1, 10 * DAY) for _ in range(3)]
        for ts in stamps:
            title = make_text(rng, theme, near, local, rng.randint(3, 8))
            body = make_text(rng, theme, near, local, rng.randint(15, 60)) if rng.random() > 0.1 else ""
            lines.append(json.dumps({"id": new_id(), "subreddit": sub, "created_utc": ts,
                                     "title": title, "selftext": body}))

    lines.append("{not json")
    lines.append(json.dumps({"subreddit": "ADHD", "created_utc": CUTOFF - 5, "title": "no id"}))
    lines.append(json.dumps({"id": new_id(), "subreddit": "gardening", "created_utc": CUTOFF - 5,
                             "title": "tomatoes", "selftext": "unregistered community"}))
    lines.append(json.dumps({"id": new_id(), "subreddit": "depression", "created_utc": CUTOFF - 5,
                             "title": "", "selftext": ""}))
    rng.shuffle(lines)
    (out / "posts.jsonl").write_text("\n".join(lines) + "\n")

    config = {
        "registry": "registry.json",
        "corpus": "posts.jsonl",
        "provider": {"kind": "local"},
        "max_tokens": 800,
        "counter": "approx_chars4",
        "cutoff_utc": CUTOFF,
        "max_posts": 40,
        "iup_n": 8,
        "classifier": {"kind": "knn", "k": 5, "metric": "cosine"},
        "tasks": [1, 2, 3, 4],
        "exclusions": [],
        "mapper": {"intervals_per_dim": 10, "overlap_fraction": 0.5, "eps": 0.5, "min_samples": 2,
                   "metric": "euclidean", "noise_policy": "drop"},
        "mapper_source": "distilled",
        "output_dir": "../../out/fixture",
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")


if __name__ == "__main__":
    main()
