"""Generate the bundled labeled review corpus used to train the informativeness filter.

Writes crates/core/data/nb_reviews.jsonl and nb_labels.jsonl (100 reviews per class).
"""
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "data"

FEATURES = [
    "save button", "search bar", "settings menu", "offline mode", "dark theme", "login screen",
    "share option", "download list", "notification panel", "sync feature", "bookmark page",
    "photo upload", "video player", "map view", "payment form", "profile page", "history tab",
    "export option", "font size setting", "widget", "sidebar", "night mode toggle",
]
PROBLEMS = [
    "the {f} crashes every time I open it",
    "when I tap the {f} the app freezes",
    "the {f} stopped working after the last update",
    "please add an option to hide the {f}",
    "the {f} does not load on my tablet",
    "could you bring back the old {f}",
    "the {f} drains the battery in the background",
    "I cannot find the {f} anymore since the redesign",
    "the {f} shows an error message and closes",
    "it would be great if the {f} supported landscape",
    "the {f} is too slow to respond",
    "after updating the {f} keeps logging me out",
]
TAILS = [
    "", " Please fix it.", " I use Android 9.", " Reinstalling did not help.",
    " Otherwise the app works.", " This needs a fix soon.", " Any workaround?",
    " Terrible, I will uninstall.", " Uninstalling until it is fixed.", " Awful since the update.",
    " Useless now, uninstalled.", " The button is broken.",
]
EMOTION = [
    "I hate this app!", "The app is awesome", "Love it", "Best app ever", "Great app",
    "Worst app I have ever used", "Amazing!", "So good", "Terrible", "Awesome app, five stars",
    "I love this app so much", "Really nice app", "Very cool", "Not bad", "Perfect",
    "Simply the best", "Fantastic job guys", "Useless", "This app is great", "Wonderful",
    "Thanks developers", "Excellent app", "Good", "Bad app", "I like it", "Nice one",
    "Awful", "So much fun", "Cool app", "Brilliant", "Lovely app", "Meh", "Superb",
    "Pretty good overall", "Five stars", "One star", "Recommended to everyone", "Wow",
    "Highly recommend this app", "Just awesome", "The app is okay", "Best of the best",
    "I really hate it", "Super happy with it", "Happy with the app", "Great work",
]
FILLERS = ["", " :)", " !!", " Thanks.", " Keep it up.", " Really.", " Honestly."]


def main():
    rng = random.Random(7)
    reviews, labels = [], []
    for i in range(100):
        f = rng.choice(FEATURES)
        text = rng.choice(PROBLEMS).format(f=f)
        text = text[0].upper() + text[1:] + rng.choice(TAILS)
        rid = f"nb-inf-{i:03d}"
        reviews.append({"id": rid, "app": "nb", "ts": "2020-01-01T00:00:00Z", "rating": rng.randint(1, 4), "text": text})
        labels.append({"id": rid, "label": "informative"})
    for i in range(100):
        text = EMOTION[i] if i < len(EMOTION) else rng.choice(EMOTION) + rng.choice(FILLERS)
        rid = f"nb-non-{i:03d}"
        reviews.append({"id": rid, "app": "nb", "ts": "2020-01-01T00:00:00Z", "rating": rng.randint(1, 5), "text": text})
        labels.append({"id": rid, "label": "non_informative"})
    with open(OUT / "nb_reviews.jsonl", "w") as fh:
        for r in reviews:
            fh.write(json.dumps(r) + "\n")
    with open(OUT / "nb_labels.jsonl", "w") as fh:
        for r in labels:
            fh.write(json.dumps(r) + "\n")


if __name__ == "__main__":
    main()
