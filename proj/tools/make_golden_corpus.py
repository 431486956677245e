#!/usr/bin/env python3
"""Writes tests/data/golden_corpus.jsonl.

Each line holds a structured reasoning document in canonical layout plus the
field values a parser has to extract from it. The layout is written out by
hand here rather than through the C++ serializer, so the two can check each
other.

    python3 tools/make_golden_corpus.py [--count 200] [--seed 20241016] [--out PATH]
"""

import argparse
import json
import random
import unicodedata
from pathlib import Path

PHRASES = {
    "en": ["OPEN 24 HOURS", "Fresh bread daily", "No parking", "Exit", "Main Street"],
    "zh": ["营业时间", "禁止吸烟", "出口", "欢迎光临", "北京路"],
    "pt": ["Promoção de verão", "Saída", "Não estacione", "Padaria São João", "Aberto"],
    "ar": ["مخبز", "ممنوع التدخين", "خروج", "مرحبا بكم", "شارع الملك"],
    "tr": ["Çıkış", "Sigara içilmez", "Günaydın", "İndirim", "Şehir merkezi"],
    "ru": ["Выход", "Не курить", "Аптека", "Добро пожаловать", "Улица Ленина"],
    "de": ["Ausgang", "Bäckerei Müller", "Rauchen verboten", "Öffnungszeiten", "Straße"],
    "fr": ["Sortie", "Boulangerie", "Défense de fumer", "Entrée libre", "Crème brûlée"],
    "it": ["Uscita", "Vietato fumare", "Caffè", "Però", "Città vecchia"],
    "ja": ["出口", "禁煙", "営業中", "いらっしゃいませ", "ラーメン"],
    "ko": ["출구", "금연", "영업중", "어서 오세요", "서울역"],
    "th": ["ทางออก", "ห้ามสูบบุหรี่", "ยินดีต้อนรับ", "ร้านกาแฟ", "ถนนสุขุมวิท"],
    "vi": ["Lối ra", "Cấm hút thuốc", "Chào mừng", "Phở bò", "Đường Lê Lợi"],
}

OBJECTS = ["bottle", "sign", "person", "car", "cup", "book", "chair", "lamp"]
CAPTIONS = [
    "A storefront with a hand-painted sign.",
    "Two signs above a doorway at dusk.",
    "A menu board next to a counter; prices in local currency.",
    "A street corner with posters on a wall.",
    "",
]


def nfc(s):
    return unicodedata.normalize("NFC", s)


def make_document(rng, index):
    lang = rng.choice(sorted(PHRASES))
    segments = []
    for _ in range(rng.randint(0, 6)):
        x1, y1 = rng.randint(0, 900), rng.randint(0, 900)
        x2, y2 = x1 + rng.randint(0, 300), y1 + rng.randint(0, 120)
        segments.append({"box": [x1, y1, x2, y2], "summary": nfc(rng.choice(PHRASES[lang]))})

    language = lang if rng.random() < 0.9 else None
    objects = rng.randint(0, 12) if rng.random() < 0.9 else None
    caption = nfc(rng.choice(CAPTIONS))
    noun = rng.choice(OBJECTS)
    reasoning = ""
    if rng.random() < 0.85:
        lines = [
            f"There are {len(segments)} text regions.",
            f"The text is written in {lang}." if language else "The language is unclear.",
            f"I can see {objects} {noun}(s)." if objects is not None else "Objects are hard to count.",
        ]
        if segments:
            lines.append(f"The first region reads \u201c{segments[0]['summary']}\u201d.")
        reasoning = nfc("\n".join(lines))

    answer_kind = rng.random()
    if answer_kind < 0.4 and segments:
        answer = segments[rng.randrange(len(segments))]["summary"]
    elif answer_kind < 0.7:
        answer = str(objects if objects is not None else rng.randint(0, 9))
    elif answer_kind < 0.95:
        answer = nfc(rng.choice(PHRASES[lang]))
    else:
        answer = ""

    parts = []
    if segments:
        parts.append("<segments>\n")
        for s in segments:
            b = s["box"]
            parts.append(f"[{b[0]},{b[1]},{b[2]},{b[3]}] {s['summary']}\n")
        parts.append("</segments>\n")
    if language:
        parts.append(f"\\lang{{{language}}}\n")
    if objects is not None:
        parts.append(f"\\obj{{{objects}}}\n")
    if caption:
        parts.append(f"<caption>{caption}</caption>\n")
    parts.append("<think>\n")
    if reasoning:
        parts.append(reasoning + "\n")
    parts.append("</think>\n")
    parts.append(f"<answer>{answer}</answer>")

    return {
        "id": f"golden-{index:03d}",
        "text": "".join(parts),
        "expected": {
            "segments": segments,
            "text_segments": len(segments),
            "language": language,
            "object_count": objects,
            "caption": caption,
            "reasoning": reasoning,
            "answer": answer,
        },
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--count", type=int, default=200)
    parser.add_argument("--seed", type=int, default=20241016)
    default_out = Path(__file__).resolve().parent.parent / "tests" / "data" / "golden_corpus.jsonl"
    parser.add_argument("--out", type=Path, default=default_out)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    docs = [make_document(rng, i) for i in range(args.count)]
    langs = {d["expected"]["language"] for d in docs} - {None}
    if len(langs) != len(PHRASES):
        raise SystemExit(f"only {len(langs)} languages drawn; pick another seed")

    args.out.parent.mkdir(parents=True, exist_ok=True)
    with args.out.open("w", encoding="utf-8", newline="\n") as f:
        for d in docs:
            f.write(json.dumps(d, ensure_ascii=False, sort_keys=True) + "\n")
    print(f"wrote {len(docs)} documents to {args.out}")


if __name__ == "__main__":
    main()
