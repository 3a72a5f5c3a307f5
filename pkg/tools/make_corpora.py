#!/usr/bin/env python3
"""Regenerate the bundled training corpora.

Three stylistically distinct plain-ASCII texts are synthesized from word
banks with a fixed seed, so the repo carries reproducible training data
without shipping anyone else's prose:

  verse.txt    archaic verse: capitalized lines, stanzas, end punctuation
  kernel.txt   C-flavored source code: braces, indentation, identifiers
  clauses.txt  committee-report prose: numbered clauses, long sentences

Run from the repo root:  python tools/make_corpora.py [--size BYTES]
"""

import argparse
import random
from pathlib import Path

SIZE_DEFAULT = 100_000

# -- verse ---------------------------------------------------------------

ADJ = """ancient silver golden mournful gentle shadowed weary radiant
hollow tender boundless quiet stormy frozen verdant pale solemn wild
fleeting sacred""".split()
NOUN = """moon sea heart rose crown sorrow night star garden river flame
winter raven harp mirror tempest meadow spirit tide lantern""".split()
VERB = [
    "doth sing", "shall mourn", "will rise", "may fall", "must wander",
    "doth keep", "shall fade", "will bloom", "may rest", "doth burn",
    "shall turn",
]
VERB2 = """whisper linger tremble wither gleam slumber vanish endure
murmur shimmer""".split()

ROMAN = ["I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X",
         "XI", "XII", "XIII", "XIV", "XV", "XVI", "XVII", "XVIII", "XIX", "XX"]


def gen_verse(rng: random.Random, size: int) -> str:
    out = []
    stanza = 0
    while sum(len(s) for s in out) < size:
        if stanza % 4 == 0:
            out.append(f"\n{ROMAN[(stanza // 4) % len(ROMAN)]}.\n\n")
        verb = rng.choice(VERB).split()
        line_kind = rng.randrange(4)
        if line_kind == 0:
            line = (
                f"The {rng.choice(ADJ)} {rng.choice(NOUN)} {verb[0]} {verb[1]} "
                f"upon the {rng.choice(NOUN)},"
            )
        elif line_kind == 1:
            line = (
                f"And {rng.choice(VERB2)}s where the {rng.choice(ADJ)} "
                f"{rng.choice(NOUN)} lies;"
            )
        elif line_kind == 2:
            line = (
                f"O {rng.choice(ADJ)} {rng.choice(NOUN)}, that {verb[0]} {verb[1]} "
                f"so {rng.choice(ADJ)},"
            )
        else:
            line = (
                f"Till every {rng.choice(NOUN)} shall {rng.choice(VERB2)} "
                f"and the {rng.choice(NOUN)} {rng.choice(VERB2)}s."
            )
        out.append(line + "\n")
        stanza += 1
    return "".join(out)


# -- kernel --------------------------------------------------------------

TYPES = ["int", "void", "char *", "size_t", "struct node *", "unsigned", "long"]
FUNCS = """init probe flush update append release lookup resize attach
validate reset drain merge split scan""".split()
SUBJ = """buf ring queue node cache page slot head tail ctx pool entry
index mask state""".split()


def gen_kernel(rng: random.Random, size: int) -> str:
    out = [
        "/*\n * Synthetic kernel-flavoured training text.\n"
        " * Generated sample: not real code, only its shape.\n */\n\n"
        "#include <stddef.h>\n#include <string.h>\n\n"
    ]
    n = 0
    while sum(len(s) for s in out) < size:
        fn = f"{rng.choice(FUNCS)}_{rng.choice(SUBJ)}"
        ret = rng.choice(TYPES)
        a, b = rng.sample(SUBJ, 2)
        body = [f"static {ret} {fn}(struct {a} *{a}, size_t {b})\n{{\n"]
        if rng.random() < 0.5:
            body.append(f"\tif (!{a} || {b} == 0)\n\t\treturn{' NULL' if '*' in ret else ' -1' if ret != 'void' else ''};\n")
        body.append(f"\tsize_t i;\n\n\tfor (i = 0; i < {b}; i++) {{\n")
        c = rng.choice(SUBJ)
        body.append(f"\t\t{a}->{c}[i] = {rng.randrange(2, 64)} * i + {rng.randrange(97)};\n")
        if rng.random() < 0.4:
            body.append(f"\t\tif ({a}->{c}[i] & 0x{rng.randrange(16):x}f)\n\t\t\tcontinue;\n")
        body.append("\t}\n")
        if "*" in ret:
            body.append(f"\treturn {a}->{rng.choice(SUBJ)};\n")
        elif ret != "void":
            body.append("\treturn 0;\n")
        body.append("}\n\n")
        if n % 5 == 0:
            body.insert(0, f"/* {rng.choice(SUBJ)}: keep the {rng.choice(SUBJ)} coherent under load */\n")
        out.extend(body)
        n += 1
    return "".join(out)


# -- clauses ---------------------------------------------------------------

ACTORS = [
    "the Committee", "the Secretary", "the Inquiry", "the Department",
    "the Council", "the Working Group", "the Directorate", "the Panel",
]
SHALL = [
    "shall consider", "shall record", "shall publish", "shall review",
    "shall assess", "shall circulate", "shall determine", "shall retain",
]
OBJECTS = [
    "the submitted evidence", "the relevant findings",
    "all supporting documentation", "the procedural record",
    "each written representation", "the consolidated annex",
    "the preliminary assessment",
]
MODIFIERS = [
    "in accordance with", "having regard to the provisions of",
    "subject to the requirements of", "without prejudice to",
]


def gen_clauses(rng: random.Random, size: int) -> str:
    out = ["REPORT OF THE STANDING INQUIRY\n\n"]
    section = 1
    while sum(len(s) for s in out) < size:
        out.append(f"{section}. {rng.choice(ACTORS).capitalize()} "
                   f"{rng.choice(SHALL)} {rng.choice(OBJECTS)}.\n\n")
        for sub in range(1, rng.randrange(2, 5)):
            sentence = (
                f"{section}.{sub} {rng.choice(ACTORS).capitalize()} "
                f"{rng.choice(SHALL)} {rng.choice(OBJECTS)}, "
                f"{rng.choice(MODIFIERS)} paragraph {rng.randrange(1, 40)}"
                f"({chr(rng.randrange(97, 105))}), and "
                f"{rng.choice(SHALL).replace('shall ', '')} {rng.choice(OBJECTS)} "
                f"no later than the {rng.randrange(2, 28)}th day of the review period.\n"
            )
            out.append(sentence)
        out.append("\n")
        section += 1
    return "".join(out)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=SIZE_DEFAULT, help="bytes per corpus")
    parser.add_argument("--out", default=None, help="output directory (default: repo corpora/)")
    args = parser.parse_args()

    out_dir = Path(args.out) if args.out else Path(__file__).parent.parent / "corpora"
    out_dir.mkdir(parents=True, exist_ok=True)
    generators = {
        "verse.txt": gen_verse,
        "kernel.txt": gen_kernel,
        "clauses.txt": gen_clauses,
    }
    for name, gen in generators.items():
        text = gen(random.Random(name), args.size)
        assert all(ord(c) < 128 for c in text), f"{name}: non-ASCII output"
        path = out_dir / name
        path.write_text(text)
        print(f"wrote {path} ({len(text)} bytes)")


if __name__ == "__main__":
    main()
