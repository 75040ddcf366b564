#!/usr/bin/env python3
"""Writes the 50-page cleaning fixture and its expected outputs.

Expected outputs come from a straightforward re-implementation of the
line rules, page rules and first-occurrence dedup written here, not from
the C++ code. Each page's language verdict is fixed by construction:
Czech pages pass, English, German and mixed pages fail.

Usage: gen_fixture.py OUT_DIR
"""
import gzip
import json
import pathlib
import random
import re
import sys

CRAWL = "CC-MAIN-2019-35"
SEGMENT = "crawl-data/CC-MAIN-2019-35/segments/1566027313259.30"
ARCHIVES = [f"CC-MAIN-20190817123129-20190817145129-0000{i}" for i in range(2)]

MARKS = ".?!"
BANNED = ["javascript", "cookies"]
KILL = ["lorem ipsum", "{"]
OFFENSIVE = ["kurva", "hovno", "prdel", "debil"]
MIN_WORDS = 3
MIN_SENTENCES = 5

SUBJ = ["Náš tým", "Krajský úřad", "Místní spolek", "Paní primářka", "Nový ředitel", "Skupina dobrovolníků",
        "Správa silnic", "Městská policie", "Základní škola", "Redakce časopisu", "Zdejší farář", "Mladý architekt",
        "Sportovní klub", "Obecní knihovna", "Technické služby", "Vedení nemocnice", "Pořadatel festivalu",
        "Zemědělské družstvo", "Turistický oddíl", "Místní pekárna"]
VERB = ["připravuje", "zveřejnil", "dokončila", "otevřel", "představil", "chystá", "podpořil", "zajistila",
        "prodloužil", "vyhlásil", "obnovil", "zorganizoval", "přestavěl", "financuje", "plánuje", "uspořádal",
        "rozšířil", "zmodernizoval", "oznámil", "doporučuje"]
OBJ = ["novou cyklostezku podél řeky", "sbírku pro opuštěná zvířata", "rekonstrukci hasičské zbrojnice",
       "letní tábor pro děti z okolí", "výstavu fotografií z první republiky", "opravu poničené kapličky",
       "kurz první pomoci pro seniory", "soutěž o nejkrásnější předzahrádku", "přednášku o houbaření",
       "večerní prohlídky zámeckého sklepení", "úpravu zeleně na sídlišti", "program pro rodiny s dětmi",
       "výsadbu ovocných stromů u cesty", "nový jízdní řád autobusů", "koncert dechové hudby na náměstí",
       "sběr starého papíru a lahví", "besedu s pamětníky války", "turnaj v malé kopané",
       "pravidelné trhy s místními výrobky", "stezku naučnou o místních mokřadech"]
TAIL = ["na příští měsíc", "už od června", "během letních prázdnin", "za podpory kraje", "v nejbližších dnech",
        "po dohodě s obyvateli", "navzdory nepříznivému počasí", "ještě před zimou", "s pomocí sponzorů",
        "v areálu bývalé továrny", "pro všechny zájemce", "bez nároku na odměnu", "v rámci oslav výročí",
        "ke spokojenosti návštěvníků", "po dlouhých přípravách"]

EN = ["The council approved a new cycling path along the river this spring.",
      "Volunteers collected old paper and glass bottles on Saturday morning.",
      "The local library extended its opening hours for the summer holidays.",
      "A concert of brass music will take place on the main square.",
      "Children from the nearby school planted fruit trees along the road.",
      "The hospital management announced a modernisation of the surgery ward.",
      "Tourists can visit the castle cellars during evening guided tours.",
      "The football club organised a tournament for young players.",
      "Farmers sold honey, cheese and vegetables at the weekly market.",
      "The regional office published the new bus timetable yesterday.",
      "Our editors recommend a walk through the old town in autumn.",
      "Firefighters repaired the station roof before the winter arrived."]
DE = ["Der Gemeinderat hat einen neuen Radweg am Fluss genehmigt.",
      "Freiwillige sammelten am Samstagmorgen Altpapier und Glasflaschen.",
      "Die Bibliothek verlängert ihre Öffnungszeiten in den Sommerferien.",
      "Auf dem Marktplatz findet ein Konzert der Blasmusik statt.",
      "Kinder aus der nahen Schule pflanzten Obstbäume entlang der Straße.",
      "Die Krankenhausleitung kündigte eine Modernisierung der Station an.",
      "Touristen können die Schlosskeller bei abendlichen Führungen besuchen.",
      "Der Fußballverein organisierte ein Turnier für junge Spieler."]

FOOTER = "Všechna práva vyhrazena."
FOOTER2 = "Redakce neodpovídá za obsah komentářů čtenářů."
NOISE_TERMINAL = ["Domů | Zprávy | Kultura | Sport", "Sdílet na sociálních sítích", "Přečtěte si také",
                  "Nejčtenější články týdne:", "Foto: archiv obce", "Přihlásit se k odběru novinek",
                  "Kontakt: redakce@obec.cz"]
NOISE_BANNED = ["Tento web používá cookies ke zlepšení služeb.", "Pro správné zobrazení stránky povolte JavaScript.",
                "Souhlasím se zpracováním COOKIES pro marketingové účely.",
                "Váš prohlížeč nemá zapnutý Javascript, některé funkce nebudou fungovat."]
NOISE_SHORT = ["Děkujeme.", "Pokračovat.", "Více informací!", "Rozumím.", "Zpět nahoru."]


class Gen:
    def __init__(self, seed):
        self.rng = random.Random(seed)
        self.used = set()

    def sentence(self):
        while True:
            s = (f"{self.rng.choice(SUBJ)} {self.rng.choice(VERB)} {self.rng.choice(OBJ)} "
                 f"{self.rng.choice(TAIL)}{self.rng.choice('..........?!')}")
            if s not in self.used:
                self.used.add(s)
                return s

    def line(self, sentences):
        return " ".join(self.sentence() for _ in range(sentences))

    def noise(self):
        kind = self.rng.randrange(3)
        return self.rng.choice([NOISE_TERMINAL, NOISE_BANNED, NOISE_SHORT][kind])

    def czech_body(self, n_lines, noise=2, footer=False):
        lines = [self.line(self.rng.randint(1, 2)) for _ in range(n_lines)]
        for _ in range(noise):
            lines.insert(self.rng.randrange(len(lines) + 1), self.noise())
        if footer:
            lines.append(FOOTER)
        return lines


def build_pages():
    g = Gen(2019)
    pages = []  # (uri, lines, czech)

    def add(name, lines, czech=True):
        pages.append((f"http://{name}.cz/clanek/{len(pages) + 1}", lines, czech))

    # kept pages, several sharing boilerplate lines
    for i in range(32):
        lines = g.czech_body(g.rng.randint(5, 8), noise=g.rng.randint(1, 3), footer=i % 3 == 0)
        if i % 5 == 1:
            lines.append(FOOTER2)
        if i == 4:
            lines.insert(1, "   " + g.line(1) + "   ")  # surrounding whitespace is trimmed
            lines.append("Funkce vrací objekt { a: 1 }")  # dropped before the kill check
        if i == 9:
            lines.append(lines[0])  # repeated inside one page
        if i == 12:
            lines.append("Cena zůstane 12.50 Kč za kus až do konce roku.")
            lines.append("")  # empty line
        if i == 17:
            lines.append("Firma Nový Den s.r.o. dodá materiál včas.")
        add(f"zpravy{i}", lines)

    # offensive words
    add("diskuse1", g.czech_body(6) + ["To je ale kurva dobrý nápad, napsal čtenář."])
    add("diskuse2", g.czech_body(6) + ["Vypadá to jako HOVNO, ale funguje to."])
    add("diskuse3", ["Takový debil, že to nedokázal opravit včas!"] + g.czech_body(5))

    # page-kill strings
    add("sablona1", g.czech_body(6) + ["Lorem ipsum dolor sit amet, consectetur adipiscing elit."])
    add("sablona2", ["LOREM IPSUM je výplňový text pro grafiky."] + g.czech_body(6))
    add("kod1", g.czech_body(6) + ["Nastavte hodnotu {limit} v souboru podle návodu."])
    add("sablona3", g.czech_body(5, noise=1) + ["Text lorem ipsum se zde zobrazuje omylem."])

    # language
    add("english1", EN[0:6], czech=False)
    add("english2", EN[6:12], czech=False)
    add("deutsch1", DE[0:7], czech=False)
    mixed = []
    for k in range(6):
        mixed.append(g.line(1))
        mixed.append(EN[k + 3])
    add("smiseny1", mixed, czech=False)

    # too few sentences
    add("kratky1", [g.line(1), g.line(1), g.line(1), "Sdílet článek"])
    add("kratky2", [g.line(2), g.line(2)])
    add("kratky3", ["Menu", "Hledat", "Děkujeme.", "Tento web používá cookies ke zlepšení služeb."])
    add("kratky4", [g.line(1)])

    # pages that fall under the sentence minimum once earlier lines are removed
    first = pages[0][1]
    second = pages[2][1]
    keep_lines = lambda ls: [l.strip() for l in ls if line_verdict(l) is None]
    add("prevzato1", [g.line(1) for _ in range(3)] + keep_lines(first)[:2])
    add("prevzato2", [g.line(1) for _ in range(4)] + keep_lines(second)[:1])
    add("prevzato3", [g.line(1) for _ in range(2)] + keep_lines(first)[2:3] + keep_lines(second)[1:3])
    assert len(pages) == 50, len(pages)
    return pages


def unselected():
    return [
        ("http://news.example.com/story/1", EN[0:5], "eng"),
        ("http://nachrichten.example.de/artikel/2", DE[0:5], "deu"),
        ("http://mixed.example.cz/page/3", EN[5:10], "eng,ces"),
        ("http://neindexovano.cz/stranka/4", ["Tato stránka chybí v indexu, proto se nevybere."] * 5, None),
    ]


# ---------------------------------------------------------------------------
# reference rules

def line_verdict(line):
    s = line.rstrip(" \t\r\n\f\v")
    if not s or s[-1] not in MARKS:
        return "terminal-punctuation"
    low = line.lower()
    if any(b in low for b in BANNED):
        return "banned-substring"
    if len(line.split()) < MIN_WORDS:
        return "min-words"
    return None


def sentences(lines):
    return sum(1 for l in lines for tok in l.split() if tok[-1] in MARKS)


def clean(body, czech):
    lines = body.split("\n")
    if body.endswith("\n"):
        lines.pop()
    if body == "":
        lines = []
    audit = {}
    kept = []
    for l in lines:
        v = line_verdict(l)
        if v:
            audit[v] = audit.get(v, 0) + 1
        else:
            kept.append(l.strip(" \t\r\n\f\v"))
    page_rule = None
    if kept:
        text = "\n".join(kept).lower() + "\n"
        if any(re.search(r"(?<!\w)" + re.escape(w) + r"(?!\w)", text) for w in OFFENSIVE):
            page_rule = "offensive-word"
        elif any(k in text for k in KILL):
            page_rule = "page-kill-string"
        elif not czech:
            page_rule = "language"
    if page_rule is None and sentences(kept) < MIN_SENTENCES:
        page_rule = "min-sentences"
    return kept, audit, page_rule, len(lines)


def warc_record(headers, body):
    head = "WARC/1.0\r\n" + "".join(f"{k}: {v}\r\n" for k, v in headers)
    data = body.encode("utf-8")
    return (head + f"Content-Length: {len(data)}\r\n\r\n").encode("utf-8") + data + b"\r\n\r\n"


def dumps(obj):
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def main():
    out = pathlib.Path(sys.argv[1])
    pages = build_pages()
    extra = unselected()

    # archive layout: first 28 selected pages plus two unselected in file 0
    records = [(u, ls, "ces", cz) for u, ls, cz in pages]
    ordered = records[:28] + [(u, ls, lang, False) for u, ls, lang in extra[:2]] + records[28:] + \
              [(u, ls, lang, False) for u, ls, lang in extra[2:]]
    split_at = 30
    files = [ordered[:split_at], ordered[split_at:]]

    wet_dir = out / SEGMENT / "wet"
    wet_dir.mkdir(parents=True, exist_ok=True)
    (out / "index").mkdir(parents=True, exist_ok=True)
    index_rows = []
    bodies = {}
    sizes = []
    for n, recs in enumerate(files):
        blob = bytearray()
        info = "software: c5-fixture\r\nformat: WARC File Format 1.0\r\n"
        blob += gzip.compress(warc_record([("WARC-Type", "warcinfo"), ("WARC-Date", "2019-08-17T12:31:29Z"),
                                           ("WARC-Filename", ARCHIVES[n] + ".warc.wet.gz"),
                                           ("Content-Type", "application/warc-fields")], info), mtime=0)
        for k, (uri, lines, lang, _) in enumerate(recs):
            body = "\n".join(lines)
            bodies[uri] = body
            headers = [("WARC-Type", "conversion"), ("WARC-Target-URI", uri),
                       ("WARC-Date", f"2019-08-17T13:{k:02d}:{n * 7:02d}Z"),
                       ("WARC-Record-ID", f"<urn:uuid:00000000-0000-0000-{n:04d}-{k:012d}>"),
                       ("Content-Type", "text/plain")]
            blob += gzip.compress(warc_record(headers, body), mtime=0)
            if lang is not None:
                warc = f"{SEGMENT}/warc/{ARCHIVES[n]}.warc.gz"
                index_rows.append(f"{uri}\t{lang}\t{warc}\t{1000 + 4096 * k}\t{2048 + 17 * k}")
        (wet_dir / f"{ARCHIVES[n]}.warc.wet.gz").write_bytes(bytes(blob))
        sizes.append(len(blob))
    (out / "index" / f"{CRAWL}.tsv").write_text("\n".join(index_rows) + "\n", encoding="utf-8")

    # expected cleaning output
    golden = out / "golden"
    golden.mkdir(exist_ok=True)
    stats = {"pages_in": 0, "pages_kept": 0, "lines_in": 0, "lines_kept": 0, "lost": 0, "input_bytes": 0,
             "pages_dropped": {}, "lines_dropped": {}}
    kept_docs = []
    for uri, lines, cz in [(u, ls, cz) for u, ls, lang, cz in ordered if lang == "ces"]:
        body = bodies[uri]
        kept, audit, page_rule, n_lines = clean(body, cz)
        stats["pages_in"] += 1
        stats["lines_in"] += n_lines
        stats["input_bytes"] += len(body.encode("utf-8"))
        for r, c in audit.items():
            stats["lines_dropped"][r] = stats["lines_dropped"].get(r, 0) + c
        if page_rule:
            stats["pages_dropped"][page_rule] = stats["pages_dropped"].get(page_rule, 0) + 1
            stats["lost"] += len(kept)
        else:
            kept_docs.append((uri, kept))
    stats["pages_kept"] = len(kept_docs)
    stats["lines_kept"] = sum(len(k) for _, k in kept_docs)
    (golden / "cleaned.jsonl").write_text("".join(dumps({"uri": u, "lines": k}) + "\n" for u, k in kept_docs),
                                          encoding="utf-8")

    seen = set()
    final = []
    duplicates = 0
    dedup_dropped = 0
    for uri, lines in kept_docs:
        out_lines = []
        for l in lines:
            if l in seen:
                duplicates += 1
            else:
                out_lines.append(l)
            seen.add(l)
        if sentences(out_lines) < MIN_SENTENCES:
            dedup_dropped += 1
            stats["lost"] += len(out_lines)
        else:
            final.append((uri, out_lines))
    (golden / "dedup.jsonl").write_text("".join(dumps({"uri": u, "lines": k}) + "\n" for u, k in final),
                                        encoding="utf-8")

    pages_dropped = dict(stats["pages_dropped"])
    if dedup_dropped:
        pages_dropped["dedup-min-sentences"] = dedup_dropped
    lines_dropped = dict(stats["lines_dropped"])
    if duplicates:
        lines_dropped["duplicate-line"] = duplicates
    retained = sum(len(l.encode("utf-8")) + 1 for _, ls in final for l in ls)
    run_stats = {
        "bytes_downloaded": sum(sizes),
        "records_parsed": len(ordered),
        "records_skipped": len(files),
        "pages_in": stats["pages_in"],
        "pages_kept": len(final),
        "pages_dropped_by_rule": dict(sorted(pages_dropped.items())),
        "lines_in": stats["lines_in"],
        "lines_kept": sum(len(ls) for _, ls in final),
        "lines_in_dropped_pages": stats["lost"],
        "lines_dropped_by_rule": dict(sorted(lines_dropped.items())),
        "dedup_removed": duplicates,
        "input_bytes": stats["input_bytes"],
        "retained_bytes": retained,
        "removal_percentage": 1.0 - retained / stats["input_bytes"],
    }
    (golden / "stats.json").write_text(json.dumps(run_stats, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")

    r = run_stats
    text = [f"records parsed: {r['records_parsed']} (non-conversion skipped: {r['records_skipped']})",
            f"bytes downloaded: {r['bytes_downloaded']}",
            f"pages: {r['pages_in']} in, {r['pages_kept']} kept"]
    text += [f"  dropped by {k}: {v}" for k, v in r["pages_dropped_by_rule"].items()]
    text.append(f"lines: {r['lines_in']} in, {r['lines_kept']} kept, {r['lines_in_dropped_pages']} lost with dropped pages")
    text += [f"  dropped by {k}: {v}" for k, v in r["lines_dropped_by_rule"].items()]
    text.append(f"duplicate lines removed: {r['dedup_removed']}")
    text.append(f"text bytes: {r['input_bytes']} in, {r['retained_bytes']} retained")
    text.append(f"removal: {r['removal_percentage'] * 100:.1f}%")
    (golden / "stats.txt").write_text("\n".join(text) + "\n", encoding="utf-8")

    # prediction file for the evaluation stage
    rng = random.Random(35)
    rows = []
    for i in range(60):
        gold = sorted(rng.sample(range(6), rng.choice([1, 1, 2, 3])))
        scores = [round(rng.uniform(0.01, 0.6) + (0.35 if j in gold else 0.0), 4) for j in range(6)]
        rows.append(f"doc{i:03d}\t{','.join(map(str, gold))}\t{','.join(f'{s:.4f}' for s in scores)}")
    (out / "predictions.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")

    counts = {**run_stats["pages_dropped_by_rule"], **run_stats["lines_dropped_by_rule"]}
    for rule in ["terminal-punctuation", "banned-substring", "min-words", "offensive-word", "page-kill-string",
                 "language", "min-sentences", "duplicate-line", "dedup-min-sentences"]:
        assert counts.get(rule, 0) >= 3, (rule, counts.get(rule, 0))


if __name__ == "__main__":
    main()
