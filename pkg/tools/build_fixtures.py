"""Regenerate the shipped mini fixtures.

    python tools/build_fixtures.py

Output is deterministic; the committed files under
src/ragharness/data/fixtures/ are exactly what this script writes.
"""

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "ragharness" / "data" / "fixtures"

FIRST = [
    "Alice", "Bruno", "Chen", "Dana", "Emeka", "Farah", "Goran", "Hana", "Ivan", "Julia",
    "Kenji", "Lena", "Marco", "Nadia", "Omar", "Priya", "Quentin", "Rosa", "Sven", "Tariq",
]
LAST = [
    "Abara", "Bergstrom", "Castillo", "Duval", "Eriksen", "Fontaine", "Gupta", "Haddad",
    "Ishikawa", "Jovanovic", "Kowalski", "Lindqvist", "Moreau", "Novak", "Okafor", "Petrov",
    "Quispe", "Rinaldi", "Sato", "Tanaka",
]
ORGS = [
    ("Tsinghua University", "tsinghua.edu.cn"),
    ("Renmin University of China", "ruc.edu.cn"),
    ("University of Toronto", "utoronto.ca"),
    ("ETH Zurich", "ethz.ch"),
    ("Stanford University", "stanford.edu"),
    ("University of Oxford", "ox.ac.uk"),
    ("Beihang University", "buaa.edu.cn"),
    ("New York University", "nyu.edu"),
    ("Max Planck Institute for Informatics", "mpi-inf.mpg.de"),
    ("University of Tokyo", "u-tokyo.ac.jp"),
]
TOPICS = [
    "Knowledge Graphs", "Information Retrieval", "Natural Language Processing", "Computer Vision",
    "Reinforcement Learning", "Robotics", "Data Mining", "Graph Neural Networks",
    "Question Answering", "Speech Recognition", "Recommender Systems", "Optimization",
    "Federated Learning", "Causal Inference", "Program Synthesis", "Image Compression",
    "Social Networks", "Bioinformatics", "Databases", "Computer Security",
]
TASKS = [
    "Entity Linking", "Scholar Profiling", "Citation Prediction", "Open-Domain QA",
    "Image Retrieval", "Motion Planning", "Anomaly Detection", "Link Prediction",
    "Text Classification", "Query Expansion", "Protein Folding", "Code Search", "Summarization",
]
ADJ = ["Scalable", "Robust", "Efficient", "Interpretable", "Sparse", "Contrastive", "Adaptive", "Hierarchical", "Neural"]
POSITIONS = ["Professor", "Associate Professor", "Assistant Professor", "Researcher", "PhD Student"]
DEGREES = ["PhD", "MSc", "BSc"]


def _line(obj):
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def build_aminer():
    rng = random.Random(20240321)
    scholars = [
        {
            "id": "p1",
            "kind": "Scholar",
            "attributes": {
                "name": "Yann Lecun",
                "organization": "New York University",
                "interest": ["AI", "Machine Learning", "Computer Vision", "Robotics", "Image Compression"],
                "email": "yl22@nyu.edu",
                "gender": "male",
                "position": "Professor",
                "bio": "Yann Lecun works on deep learning, convolutional networks and self-supervised learning.",
                "education": "PhD, Universite Pierre et Marie Curie",
            },
            "relations": {},
        }
    ]
    pairs = [(f, l) for f in FIRST for l in LAST]
    rng.shuffle(pairs)
    for i, (first, last) in enumerate(pairs[:59], start=2):
        org, dom = ORGS[rng.randrange(len(ORGS))]
        attrs = {
            "name": f"{first} {last}",
            "organization": org,
            "interest": rng.sample(TOPICS, rng.randint(3, 5)),
            "email": f"{first[0].lower()}{last.lower()}{rng.randint(1, 99)}@{dom}",
            "gender": "female" if i % 2 else "male",
            "position": POSITIONS[rng.randrange(len(POSITIONS))],
            "bio": f"{first} {last} studies {rng.choice(TOPICS).lower()} at {org}.",
            "education": f"{rng.choice(DEGREES)}, {rng.choice(ORGS)[0]}",
        }
        # a few sparse profiles exercise absent-attribute handling
        if i % 17 == 0:
            del attrs["organization"]
        if i % 13 == 0:
            del attrs["email"]
        scholars.append({"id": f"p{i}", "kind": "Scholar", "attributes": attrs, "relations": {}})

    ids = [s["id"] for s in scholars]
    titles = set()
    pubs = []
    n = 0
    while len(pubs) < 130:
        n += 1
        topic = rng.choice(TOPICS)
        title = f"{rng.choice(ADJ)} {topic} for {rng.choice(TASKS)}"
        if title in titles:
            continue
        titles.add(title)
        authors = rng.sample(ids, rng.randint(1, 4))
        if len(pubs) < 6 and "p1" not in authors:
            authors[0] = "p1"
        pubs.append(
            {
                "id": f"pub{len(pubs) + 1}",
                "kind": "Publication",
                "attributes": {
                    "title": title,
                    "year": rng.randint(1995, 2023),
                    "abstract": f"This paper studies {topic.lower()}. We propose a {title.split()[0].lower()} method and evaluate it on standard benchmarks.",
                    "citation_count": rng.randint(0, 2500),
                },
                "relations": {"authors": authors},
            }
        )
    for s in scholars:
        mine = [p for p in pubs if s["id"] in p["relations"]["authors"]]
        s["attributes"]["publication_count"] = len(mine)
        s["attributes"]["citation_count"] = sum(p["attributes"]["citation_count"] for p in mine)
    return scholars + pubs


COUNTRIES = [
    ("Valdoria", "Europe", "valdor", "Valdorian"),
    ("Kestrania", "Asia", "kestran mark", "Kestranian"),
    ("Orlemia", "Africa", "orlem", "Orlemic"),
    ("Brakmoor", "Europe", "brak crown", "Brakish"),
    ("Sunhaven", "Oceania", "sun dollar", "Havenese"),
    ("Tarvonia", "South America", "tarvo", "Tarvonian"),
    ("Elmoria", "Asia", "elm", "Elmorian"),
    ("Quillon", "North America", "quill", "Quillonese"),
    ("Zandria", "Africa", "zandri", "Zandrian"),
    ("Marrowfen", "Europe", "fen pound", "Marrish"),
    ("Lunaris", "Oceania", "lunar", "Lunari"),
    ("Pellucia", "South America", "pell", "Pellucian"),
]
SYL_A = ["Bre", "Cor", "Dal", "Esk", "Fal", "Gri", "Hol", "Ist", "Jor", "Kal", "Lor", "Mor"]
SYL_B = ["ven", "dun", "mar", "holt", "wick", "stad", "ford", "grad", "mere"]
MAYOR_FIRST = ["Ada", "Boris", "Clara", "Dario", "Elise", "Felix", "Greta", "Hugo", "Iris"]
MAYOR_LAST = ["Brandt", "Corvin", "Delacroix", "Ede", "Falk", "Grell", "Holm", "Ivers", "Juno"]


def build_wiki():
    rng = random.Random(1789)
    arts = []
    arts.append(
        {
            "id": "w1",
            "kind": "Article",
            "attributes": {
                "title": "Paris",
                "abstract": "Paris is the capital and largest city of France. It lies on the Seine river in northern France.",
                "category": "city",
                "country": "France",
                "river": "Seine",
            },
            "relations": {"country": ["w2"], "river": ["w5"]},
            "sections": [
                ["History", "Paris grew from a Gallic settlement on an island in the Seine. It became the seat of the French kings in the Middle Ages."],
                ["Landmarks", "The Eiffel Tower was completed in 1889 for a world fair. The Louvre is the most visited museum in the world."],
            ],
        }
    )
    arts.append(
        {
            "id": "w2",
            "kind": "Article",
            "attributes": {
                "title": "France",
                "abstract": "France is a country in Western Europe. Its capital is Paris.",
                "category": "country",
                "capital": "Paris",
                "continent": "Europe",
                "currency": "euro",
                "official_language": "French",
            },
            "relations": {"capital": ["w1"]},
            "sections": [
                ["Geography", "France borders Belgium, Germany, Switzerland, Italy and Spain. The Loire is its longest river."],
                ["Economy", "France uses the euro. It is one of the largest economies in Europe."],
            ],
        }
    )
    arts.append(
        {
            "id": "w3",
            "kind": "Article",
            "attributes": {
                "title": "Gradient descent",
                "abstract": "Gradient descent is a first-order iterative optimization algorithm for finding a local minimum of a differentiable function.",
                "category": "algorithm",
            },
            "relations": {},
            "sections": [
                ["Description", "The method takes repeated steps opposite to the gradient of the function at the current point. The step size is called the learning rate."],
                ["History", "The method is usually attributed to Augustin-Louis Cauchy in 1847. Haskell Curry analysed the gradient method for nonlinear problems in 1944."],
                ["Variants", "Stochastic gradient descent estimates the gradient from a random subset of the data. Momentum methods add a fraction of the previous update. Is the learning rate fixed? Not always!"],
            ],
        }
    )
    arts.append(
        {
            "id": "w4",
            "kind": "Article",
            "attributes": {
                "title": "Eiffel Tower",
                "abstract": "The Eiffel Tower is a wrought-iron lattice tower in Paris, France, completed in 1889.",
                "category": "landmark",
                "country": "France",
            },
            "relations": {"country": ["w2"]},
            "sections": [["Design", "The tower was designed by the company of Gustave Eiffel. It is 330 metres tall."]],
        }
    )
    arts.append(
        {
            "id": "w5",
            "kind": "Article",
            "attributes": {
                "title": "Seine",
                "abstract": "The Seine is a river in northern France that flows through Paris into the English Channel.",
                "category": "river",
                "country": "France",
            },
            "relations": {"country": ["w2"]},
            "sections": [["Course", "The Seine rises at Source-Seine. It is 777 kilometres long."]],
        }
    )
    arts.append(
        {
            "id": "w6",
            "kind": "Article",
            "attributes": {
                "title": "Machine learning",
                "abstract": "Machine learning is a field of study in artificial intelligence concerned with statistical algorithms that learn from data.",
                "category": "field",
            },
            "relations": {},
            "sections": [["Approaches", "Supervised learning uses labelled examples. Unsupervised learning finds structure in unlabelled data."]],
        }
    )
    arts.append(
        {
            "id": "w7",
            "kind": "Article",
            "attributes": {
                "title": "Yann LeCun",
                "abstract": "Yann LeCun is a French computer scientist known for convolutional neural networks.",
                "category": "person",
            },
            "relations": {},
            "sections": [["Career", "LeCun is a professor at New York University. He received the Turing Award in 2018."]],
        }
    )
    arts.append(
        {
            "id": "w8",
            "kind": "Article",
            "attributes": {
                "title": "Convolutional neural network",
                "abstract": "A convolutional neural network is a feed-forward neural network that learns features through filter optimization.",
                "category": "model",
            },
            "relations": {},
            "sections": [["Architecture", "Convolutional layers apply learned filters to the input. Pooling layers reduce spatial size."]],
        }
    )

    city_names = [a + b for a in SYL_A for b in SYL_B]
    rng.shuffle(city_names)
    mayors = [f"{a} {b}" for a in MAYOR_FIRST for b in MAYOR_LAST]
    rng.shuffle(mayors)
    next_id = 9
    for ci, (country, continent, currency, language) in enumerate(COUNTRIES):
        cid = f"w{next_id}"
        rid = f"w{next_id + 1}"
        next_id += 2
        cities = []
        for k in range(3):
            cities.append((f"w{next_id}", city_names.pop()))
            next_id += 1
        capital_id, capital = cities[0]
        river = f"{country[:3]}ava River"
        length = rng.randint(120, 1900)
        source = f"Mount {city_names.pop()}"
        population = rng.randint(1, 90) * 100000
        arts.append(
            {
                "id": cid,
                "kind": "Article",
                "attributes": {
                    "title": country,
                    "abstract": f"{country} is a country in {continent}. Its capital is {capital}.",
                    "category": "country",
                    "capital": capital,
                    "continent": continent,
                    "currency": currency,
                    "official_language": language,
                    "population": population,
                },
                "relations": {"capital": [capital_id]},
                "sections": [
                    ["Geography", f"{country} lies in {continent}. The {river} is its main river."],
                    ["Economy", f"The currency of {country} is the {currency}. Trade is centred on {capital}."],
                    ["Culture", f"The official language is {language}. About {population} people live in {country}."],
                ],
            }
        )
        arts.append(
            {
                "id": rid,
                "kind": "Article",
                "attributes": {
                    "title": river,
                    "abstract": f"The {river} is a river in {country}.",
                    "category": "river",
                    "country": country,
                    "length_km": length,
                    "source": source,
                },
                "relations": {"country": [cid]},
                "sections": [["Course", f"The {river} rises at {source}. It is {length} kilometres long and flows through {capital}."]],
            }
        )
        for k, (aid, name) in enumerate(cities):
            pop = rng.randint(5, 3000) * 1000
            founded = rng.randint(800, 1950)
            elevation = rng.randint(2, 2400)
            mayor = mayors.pop()
            role = f"the capital of {country}" if k == 0 else f"a city in {country}"
            arts.append(
                {
                    "id": aid,
                    "kind": "Article",
                    "attributes": {
                        "title": name,
                        "abstract": f"{name} is {role}, founded in {founded}.",
                        "category": "city",
                        "country": country,
                        "river": river,
                        "population": pop,
                        "founded": founded,
                        "elevation_m": elevation,
                        "mayor": mayor,
                    },
                    "relations": {"country": [cid], "river": [rid]},
                    "sections": [
                        ["Geography", f"{name} lies on the {river}. The city stands {elevation} metres above sea level."],
                        ["Demographics", f"{name} has a population of {pop}. It was founded in {founded}."],
                        ["Government", f"The mayor of {name} is {mayor}. The city council meets monthly."],
                    ],
                }
            )
    return arts


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, rows in (("mini_aminer.jsonl", build_aminer()), ("mini_wiki.jsonl", build_wiki())):
        (OUT / name).write_text("".join(_line(r) + "\n" for r in rows), encoding="utf-8")
        print(f"{name}: {len(rows)} records")


if __name__ == "__main__":
    main()
