#!/usr/bin/env python3
"""Regenerates the committed test fixtures.

evolution/  one multi-hop question with a hand-built dependency parse, a small
            corpus and a scripted transcript keyed by (template, node surface).
toy/        ten two-hop "Where was the <role> of the film <T> born?" questions
            over a 50-paragraph corpus, with parses and scripted transcripts.

Output is deterministic; run from any directory.
"""

import json
import math
from pathlib import Path

ROOT = Path(__file__).resolve().parent


def est(text):
    return math.ceil(len(text.split()) * 13 / 10)


def entry(key, text, prompt_tokens=400):
    return {
        "key": key,
        "response_text": text,
        "prompt_tokens": prompt_tokens,
        "completion_tokens": est(text),
    }


def conllu(text, rows):
    """rows: (form, upos, head, deprel)"""
    lines = [f"# text = {text}"]
    for i, (form, upos, head, rel) in enumerate(rows, start=1):
        lines.append("\t".join([str(i), form, "_", upos, "_", "_", str(head), rel, "_", "_"]))
    return "\n".join(lines) + "\n\n"


def write_jsonl(path, items):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for it in items:
            f.write(json.dumps(it, ensure_ascii=False) + "\n")


def write_text(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# --------------------------------------------------------------------------
# Evolution

EVO_Q = "What screenwriter with credits for 'Evolution' co-wrote a film starring Nicolas Cage and Téa Leoni?"

# Function words are attached high so that the pruned tree keeps exactly the
# five sub-phrases of interest (see the ledger note on this fixture).
EVO_ROWS = [
    ("What", "PRON", 7, "det"),
    ("screenwriter", "NOUN", 7, "nsubj"),
    ("with", "ADP", 2, "case"),
    ("credits", "NOUN", 2, "nmod"),
    ("for", "ADP", 6, "case"),
    ("'Evolution'", "PROPN", 4, "nmod"),
    ("co-wrote", "VERB", 0, "root"),
    ("a", "DET", 7, "det"),
    ("film", "NOUN", 7, "obj"),
    ("starring", "VERB", 9, "acl"),
    ("Nicolas", "PROPN", 10, "obj"),
    ("Cage", "PROPN", 11, "flat"),
    ("and", "CCONJ", 11, "cc"),
    ("Téa", "PROPN", 11, "conj"),
    ("Leoni", "PROPN", 14, "flat"),
    ("?", "PUNCT", 7, "punct"),
]

EVO_NODES = [
    (
        "credits for 'Evolution'",
        [
            "Who wrote the screenplay of the 2001 film Evolution?",
            "Which film starring Nicolas Cage and Téa Leoni shares a screenwriter with Evolution?",
            "When was Evolution released?",
        ],
        "Evolution (2001) was written for the screen by David Diamond and David Weissman from a story by "
        "Don Jakoby. Diamond and Weissman also wrote The Family Man, starring Nicolas Cage and Téa Leoni. "
        "Evolution came out in 2001.",
    ),
    (
        "screenwriter with credits for 'Evolution'",
        [
            "Which screenwriters are credited on Evolution?",
            "Which Nicolas Cage and Téa Leoni film did the same screenwriters write?",
            "In which year was Evolution released?",
        ],
        "The credited screenwriters of Evolution are David Diamond and David Weissman; the pair also wrote "
        "The Family Man with Nicolas Cage and Téa Leoni. Evolution was released in 2001.",
    ),
    (
        "Nicolas Cage and Téa Leoni",
        [
            "Which films feature both Nicolas Cage and Téa Leoni?",
            "Who co-wrote the screenplay of Evolution?",
            "What is Evolution about?",
        ],
        "Nicolas Cage and Téa Leoni co-starred in The Family Man (2000), a romantic comedy-drama. Evolution "
        "was co-written by David Diamond and David Weissman after a story by Don Jakoby; it is a comedy about "
        "fast-evolving alien organisms.",
    ),
    (
        "starring Nicolas Cage and Téa Leoni",
        [
            "Which film did Nicolas Cage and Téa Leoni star in together?",
            "Who were the screenplay co-writers of Evolution?",
            "What themes does Evolution explore?",
            "When was The Family Man released?",
            "What genre is The Family Man?",
        ],
        "Nicolas Cage and Téa Leoni starred in The Family Man, released on December 22, 2000, a romantic "
        "comedy-drama. Evolution's screenplay was co-written by David Diamond and David Weissman.",
    ),
    (
        "film starring Nicolas Cage and Téa Leoni",
        [
            "Which film stars Nicolas Cage and Téa Leoni?",
            "Who co-wrote the screenplay of Evolution?",
            "When did The Family Man premiere?",
        ],
        "The film with Nicolas Cage and Téa Leoni is The Family Man (2000). David Diamond and David Weissman, "
        "a regular writing team, co-wrote both it and Evolution. The Family Man premiered on December 22, 2000.",
    ),
]

EVO_FINAL = (
    "Explanations: The sub-phrase evidence agrees that Evolution was written by David Diamond and David "
    "Weissman, and that the same two writers wrote The Family Man, which stars Nicolas Cage and Téa Leoni.\n"
    "FINAL: The screenwriters credited for the film Evolution are David Diamond and David Weissman."
)

EVO_CORPUS = [
    ("evolution_film", "Evolution (2001 film)",
     "Evolution is a 2001 American science fiction comedy film directed by Ivan Reitman. The screenplay was "
     "written by David Diamond and David Weissman, based on a story by Don Jakoby. Alien organisms evolve "
     "rapidly after a meteor lands in the Arizona desert."),
    ("family_man", "The Family Man",
     "The Family Man is a 2000 American romantic comedy-drama film directed by Brett Ratner and written by "
     "David Diamond and David Weissman. It stars Nicolas Cage and Téa Leoni."),
    ("david_diamond", "David Diamond (screenwriter)",
     "David Diamond is an American screenwriter who frequently works with David Weissman. Their credits "
     "include Evolution, The Family Man and Old Dogs."),
    ("david_weissman", "David Weissman",
     "David Weissman is an American screenwriter and producer, best known for co-writing films with David "
     "Diamond, including Evolution and The Family Man."),
    ("don_jakoby", "Don Jakoby",
     "Don Jakoby is an American screenwriter. He wrote the original story for Evolution and co-wrote "
     "Lifeforce and Invaders from Mars."),
    ("nicolas_cage", "Nicolas Cage",
     "Nicolas Cage is an American actor. His films include Leaving Las Vegas, Face/Off, Con Air and The "
     "Family Man, in which he starred opposite Téa Leoni."),
    ("tea_leoni", "Téa Leoni",
     "Téa Leoni is an American actress. She starred in Deep Impact, Jurassic Park III and The Family Man "
     "with Nicolas Cage."),
    ("ivan_reitman", "Ivan Reitman",
     "Ivan Reitman was a Canadian filmmaker who directed Ghostbusters, Twins and the 2001 film Evolution."),
    ("evolution_biology", "Evolution",
     "In biology, evolution is the change in heritable characteristics of populations over successive "
     "generations."),
    ("old_dogs", "Old Dogs",
     "Old Dogs is a 2009 comedy film written by David Diamond and David Weissman and starring John Travolta "
     "and Robin Williams."),
    ("deep_impact", "Deep Impact",
     "Deep Impact is a 1998 disaster film starring Téa Leoni, Robert Duvall and Morgan Freeman."),
    ("face_off", "Face/Off",
     "Face/Off is a 1997 action film starring Nicolas Cage and John Travolta, directed by John Woo."),
]


def evolution():
    out = ROOT / "evolution"
    write_text(out / "parses" / "evolution.conllu", conllu(EVO_Q, EVO_ROWS))
    write_jsonl(out / "corpus.jsonl", [{"id": i, "title": t, "text": x} for i, t, x in EVO_CORPUS])
    write_jsonl(
        out / "questions.jsonl",
        [{"id": "evolution", "question": EVO_Q, "answers": ["David Diamond and David Weissman"]}],
    )
    transcript = []
    for surface, questions, evidence in EVO_NODES:
        transcript.append(entry(f"qg_multihop::{surface}", "response: " + "; ".join(questions)))
        transcript.append(entry(f"sag::{surface}", evidence, prompt_tokens=1800))
    transcript.append(entry(f"fag_multihop::{EVO_Q}", EVO_FINAL, prompt_tokens=900))
    write_jsonl(out / "transcript.jsonl", transcript)


# --------------------------------------------------------------------------
# Toy benchmark

TOY = [
    # (film, year, role, person, city)
    ("Zephyrine", 1998, "director", "Mara Quell", "Lisbon"),
    ("Harrowgate", 2004, "producer", "Tobias Venn", "Winnipeg"),
    ("Obsidianne", 1987, "composer", "Ilse Marrow", "Graz"),
    ("Quillfeather", 2011, "screenwriter", "Dario Pell", "Valparaíso"),
    ("Tamberlyne", 1993, "cinematographer", "Noor Hadid", "Tangier"),
    ("Velloran", 2016, "director", "Ansel Broke", "Tromsø"),
    ("Cindermoor", 1979, "editor", "Priya Salk", "Mysore"),
    ("Ashgrove", 2008, "producer", "Leopold Vance", "Ghent"),
    ("Marrowind", 2001, "composer", "Yuki Tanabe", "Sapporo"),
    ("Thistledown", 1990, "screenwriter", "Oren Galt", "Haifa"),
]

DISTRACTOR_CITIES = [
    ("Lisbon", "Portugal"), ("Winnipeg", "Canada"), ("Graz", "Austria"), ("Valparaíso", "Chile"),
    ("Tangier", "Morocco"), ("Tromsø", "Norway"), ("Mysore", "India"), ("Ghent", "Belgium"),
    ("Sapporo", "Japan"), ("Haifa", "Israel"),
]

# Other people in the same roles, born elsewhere, to make the person lookup
# non-trivial for BM25.
DISTRACTOR_PEOPLE = [
    ("Mara Quist", "director", "Bergen"), ("Tobias Vane", "producer", "Halifax"),
    ("Ilse Morrow", "composer", "Linz"), ("Dario Pellegrini", "screenwriter", "Turin"),
    ("Noor Hadi", "cinematographer", "Fez"), ("Ansel Brooke", "director", "Leeds"),
    ("Priya Salkar", "editor", "Pune"), ("Leopold Vane", "producer", "Bruges"),
    ("Yuki Tanaka", "composer", "Osaka"), ("Oren Gall", "screenwriter", "Eilat"),
]

DISTRACTOR_FILMS = [
    ("Zephyr Falls", 1996, "A drama about a lighthouse keeper."),
    ("Harrow Lane", 2002, "A thriller set in a boarding school."),
    ("Obsidian Sky", 1985, "A science fiction film about a mining colony."),
    ("Quill and Ink", 2013, "A comedy about rival calligraphers."),
    ("Tamber Road", 1994, "A road movie across the Sahara."),
    ("Vellora", 2015, "An animated film about a fox."),
    ("Cinder Hill", 1981, "A western about a burned-out town."),
    ("Ashen", 2009, "A war film set in 1917."),
    ("Marrow Creek", 2003, "A horror film set in a swamp."),
    ("Thistle", 1991, "A period drama in the Scottish Highlands."),
]


def toy_tokens(role, film):
    return [
        ("Where", "ADV", 9, "advmod"),
        ("was", "AUX", 9, "aux:pass"),
        ("the", "DET", 4, "det"),
        (role, "NOUN", 9, "nsubj:pass"),
        ("of", "ADP", 7, "case"),
        ("the", "DET", 7, "det"),
        ("film", "NOUN", 4, "nmod"),
        (film, "PROPN", 7, "appos"),
        ("born", "VERB", 0, "root"),
        ("?", "PUNCT", 9, "punct"),
    ]


def toy():
    out = ROOT / "toy"
    corpus, questions, transcript = [], [], []
    for i, (film, year, role, person, city) in enumerate(TOY):
        qid = f"toy{i:02d}"
        q = f"Where was the {role} of the film {film} born?"
        questions.append({"id": qid, "question": q, "answers": [city]})
        write_text(out / "parses" / f"{qid}.conllu", conllu(q, toy_tokens(role, film)))

        slug = film.lower()
        corpus.append({
            "id": f"film_{slug}",
            "title": film,
            "text": f"{film} is a {year} film. Its {role} was {person}. The film premiered at a festival in "
                    f"{year} and received mixed reviews.",
        })
        corpus.append({
            "id": f"person_{person.lower().replace(' ', '_')}",
            "title": person,
            "text": f"{person} is a film {role} born in {city}. {person} worked on {film} among other films.",
        })

        inner = f"of the film {film}"
        outer = f"the {role} of the film {film}"
        transcript.append(entry(
            f"qg_multihop::{inner}",
            f"response: What is the film {film}?; Who was the {role} of {film}?; When was {film} released?",
        ))
        transcript.append(entry(
            f"sag::{inner}",
            f"{film} is a {year} film whose {role} was {person}.",
            prompt_tokens=1500,
        ))
        transcript.append(entry(
            f"qg_multihop::{outer}",
            f"response: Who is {person}?; Where was {person} born?; Which films did {person} work on?",
        ))
        transcript.append(entry(
            f"sag::{outer}",
            f"The {role} of {film} was {person}, who was born in {city}.",
            prompt_tokens=1500,
        ))
        transcript.append(entry(
            f"fag_multihop::{q}",
            f"Explanations: {film} had {person} as {role}, and {person} was born in {city}.\nFINAL: {city}",
            prompt_tokens=600,
        ))

    for city, country in DISTRACTOR_CITIES:
        corpus.append({
            "id": f"city_{city.lower()}",
            "title": city,
            "text": f"{city} is a city in {country}. It has a film festival and a university.",
        })
    for person, role, city in DISTRACTOR_PEOPLE:
        corpus.append({
            "id": f"person_{person.lower().replace(' ', '_')}",
            "title": person,
            "text": f"{person} is a film {role} born in {city}.",
        })
    for film, year, blurb in DISTRACTOR_FILMS:
        corpus.append({
            "id": f"film_{film.lower().replace(' ', '_')}",
            "title": film,
            "text": f"{film} is a {year} film. {blurb}",
        })
    assert len(corpus) == 50, len(corpus)
    write_jsonl(out / "corpus.jsonl", corpus)
    write_jsonl(out / "questions.jsonl", questions)
    write_jsonl(out / "transcript.jsonl", transcript)


if __name__ == "__main__":
    evolution()
    toy()
