"""Generate the Wikipedia-style walkthrough fixture under crates/core/fixtures/wikipedia.

Three releases (1.8, 2.0, 2.1). Release 2.0 carries a "Saved pages" view that is gone in 2.1.
Its review window holds 71 reviews about saved pages in two themes (sync problems, offline
reading), other informative reviews that fix the window's mean rating, and chatter for the filter.
"""
import json
import random
import shutil
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "fixtures" / "wikipedia"

RELEASES = [("1.8", "2015-01-10T00:00:00Z"), ("2.0", "2015-03-01T00:00:00Z"), ("2.1", "2015-05-01T00:00:00Z")]

STRINGS = {
    "saved_pages": "Saved pages",
    "menu_share": "Share via",
    "menu_close_tabs": "Close all tabs",
    "location_service": "Location service",
    "login_button": "Login",
    "search_hint": "Search Wikipedia",
}

# sync theme: 47 reviews. sentiment word counts chosen so cluster means land on the targets
SYNC = {
    "bad": ["Bad saved pages sync, saved pages"] * 4,
    "useless": ["Saved pages sync useless, saved pages crash"] * 11 + ["Useless saved pages sync, saved pages"] * 11,
    "fail": ["Saved pages sync fails, saved pages"] * 11,
    "none": ["Saved pages sync crashes, saved pages"] * 8 + ["Uninstalling: saved pages sync, saved pages"] * 2,
}
SYNC_RATINGS = [1] * 33 + [2] * 13 + [3]

OFFLINE = {
    "lose": ["Lost saved pages in offline mode, saved pages"] * 16,
    "disappointment": ["Disappointment: offline saved pages, saved pages"] * 5,
    "waste": ["Saved pages offline mode is a waste, saved pages"] * 2,
    "none": ["Saved pages offline mode, saved pages"],
}
OFFLINE_RATINGS = [3] * 17 + [4] * 7

OTHER = [
    "Share via menu works with Facebook now, thanks for the update",
    "The share via option sends articles to my friends",
    "Close all tabs button works, good update",
    "Location service finds nearby articles on the map",
    "Login works with my account after the update",
    "Search Wikipedia box finds articles fast",
    "Please add a dark theme for night reading",
    "Nearby articles feature with location service works great",
    "Would like a font size setting for articles",
    "The new tabs feature works on my tablet",
    "Please add an offline mode for articles",
    "Reading lists sync across devices now",
    "Search used to be a waste of time, now it works",
    "Lost my login once, works now after the update",
    "Night mode works offline too",
    "Almost did uninstall, but the update fixed search",
    "Login is not bad after the update",
    "Dark mode for the tabs would help",
    "Reading mode works on my phone",
    "The old search was a disappointment, the update fixed it",
]

CHATTER = ["I hate this app!", "The app is awesome", "Love it", "Best app ever"]


def layout(with_saved):
    rows = [
        '<?xml version="1.0" encoding="utf-8"?>',
        '<LinearLayout xmlns:android="http://schemas.android.com/apk/res/android"',
        '    android:orientation="vertical">',
        '    <EditText android:id="@+id/search_box" android:hint="@string/search_hint" />',
        '    <Switch android:id="@+id/location_service" android:text="@string/location_service" />',
        '    <Button android:id="@+id/login_button" android:text="@string/login_button" />',
    ]
    if with_saved:
        rows.append('    <org.wikipedia.savedpages.SavedPagesView android:id="@+id/saved_pages" android:text="@string/saved_pages" />')
    rows.append("</LinearLayout>")
    return "\n".join(rows) + "\n"


MENU = """<?xml version="1.0" encoding="utf-8"?>
<menu xmlns:android="http://schemas.android.com/apk/res/android">
    <item android:id="@+id/menu_share" android:title="@string/menu_share" />
    <item android:id="@+id/menu_close_tabs" android:title="@string/menu_close_tabs" />
</menu>
"""


def strings_xml():
    body = "\n".join(f'    <string name="{k}">{v}</string>' for k, v in STRINGS.items())
    return f'<?xml version="1.0" encoding="utf-8"?>\n<resources>\n{body}\n</resources>\n'


def write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def ts(rng, month, day_span):
    d = rng.randint(1, day_span)
    return f"2015-{month:02d}-{d:02d}T{rng.randint(0, 23):02d}:{rng.randint(0, 59):02d}:00Z"


def main():
    rng = random.Random(11)
    if OUT.exists():
        shutil.rmtree(OUT)
    releases = []
    for version, date in RELEASES:
        root = OUT / "res" / f"v{version}" / "res"
        write(root / "layout" / "main.xml", layout(version != "2.1"))
        write(root / "menu" / "main.xml", MENU)
        write(root / "values" / "strings.xml", strings_xml())
        releases.append({"app": "org.wikipedia", "version": version, "date": date, "resources": f"res/v{version}"})

    reviews = []

    def add(prefix, text, rating, month, span):
        reviews.append({
            "id": f"{prefix}-{len(reviews):03d}",
            "app": "org.wikipedia",
            "ts": ts(rng, month, span),
            "rating": rating,
            "text": text,
        })

    # release 1.8 window
    add("w18", "Updates deleted my saved pages in the offline mode", 2, 2, 27)
    for i in range(40):
        add("w18", OTHER[i % len(OTHER)], 5 if i % 4 else 4, 1 if i % 2 else 2, 27 if i % 2 == 0 else 9)
    # release 2.0 window: the 71 saved pages reviews
    sync = [t for ts_ in SYNC.values() for t in ts_]
    offline = [t for ts_ in OFFLINE.values() for t in ts_]
    assert len(sync) == 47 and len(offline) == 24
    for text, rating in zip(sync, SYNC_RATINGS):
        add("sync", text, rating, 3 + rng.randint(0, 1), 28)
    for text, rating in zip(offline, OFFLINE_RATINGS):
        add("offline", text, rating, 3 + rng.randint(0, 1), 28)
    # other informative reviews in the window: 197 fives and 3 fours
    for i in range(200):
        add("w20", OTHER[i % len(OTHER)], 4 if i < 3 else 5, 3 + i % 2, 28)
    for text in CHATTER:
        add("chat", text, rng.randint(1, 5), 3, 28)
    # release 2.1 window
    for i in range(30):
        add("w21", OTHER[i % len(OTHER)], 5, 5, 28)

    rng.shuffle(reviews)
    with open(OUT / "reviews.jsonl", "w") as fh:
        for r in reviews:
            fh.write(json.dumps(r) + "\n")
    with open(OUT / "releases.jsonl", "w") as fh:
        for r in releases:
            fh.write(json.dumps(r) + "\n")

    # labeled rows from other apps for the forest
    rows = []
    for i in range(60):
        deleted = i % 2 == 0
        if deleted:
            rating = round(rng.uniform(1.0, 2.3), 2)
            f = dict(polarity=round(rng.uniform(-0.7, -0.25), 2), objectivity=round(rng.uniform(0.1, 0.4), 2),
                     uninstall=rng.randint(1, 4), delta_rating=round(rng.uniform(1.5, 3.2), 2))
        else:
            rating = round(rng.uniform(3.6, 5.0), 2)
            f = dict(polarity=round(rng.uniform(-0.1, 0.6), 2), objectivity=round(rng.uniform(0.1, 0.6), 2),
                     uninstall=0, delta_rating=round(rng.uniform(-0.6, 0.6), 2))
        n = rng.randint(5, 60)
        rows.append({"app": f"train{i // 10}", "element_key": f"element_{i}", "release_ordinal": 0, "topic": 0,
                     "n_reviews": n, "rating": rating, **f, "label": "deleted" if deleted else "not_deleted"})
    with open(OUT / "rf_train.jsonl", "w") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")

    judgments = [
        {"doc": "sync-review", "theta": {"0": 0.85, "1": 0.1, "2": 0.05}, "intruder": "2", "selected": ["2", "2", "2", "1"]},
        {"doc": "offline-review", "theta": {"0": 0.2, "1": 0.75, "2": 0.05}, "intruder": "2", "selected": ["2", "2", "0"]},
    ]
    with open(OUT / "judgments.jsonl", "w") as fh:
        for j in judgments:
            fh.write(json.dumps(j) + "\n")

    (OUT / "pipeline.conf").write_text(
        "# walkthrough fixture\n"
        "reviews = reviews.jsonl\n"
        "releases = releases.jsonl\n"
        "rf_train = rf_train.jsonl\n"
        "judgments = judgments.jsonl\n"
        "out = out\n"
        "seed = 0\n"
        "threshold = 0.65\n"
        "hdp_alpha = 0.1\n"
        "hdp_eta = 0.1\n"
    )


if __name__ == "__main__":
    main()
