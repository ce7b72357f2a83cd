#!/usr/bin/env python3
# Builds corpus.json for the golden prompts from the spider_mini schemas.
import json
import os

here = os.path.dirname(os.path.abspath(__file__))
mini = os.path.join(here, "..", "spider_mini")
spider = {d["db_id"]: d for d in json.load(open(os.path.join(mini, "tables.json")))}
train = json.load(open(os.path.join(mini, "train.json")))

# The least-to-most golden prompts show college_1 without these two columns.
DROP = {"college_1": {("EMPLOYEE", "EMP_FNAME"), ("DEPARTMENT", "DEPT_EXTENSION")}}


def internal(db_id):
    d = spider[db_id]
    drop = {(t.lower(), c.lower()) for t, c in DROP.get(db_id, set())}
    tables = d["table_names_original"]
    cols = [None] * len(d["column_names_original"])
    out_tables = [{"name": t, "columns": [], "content_sample": None} for t in tables]
    for i, ((ti, name), typ) in enumerate(zip(d["column_names_original"], d["column_types"])):
        if ti < 0 or (tables[ti].lower(), name.lower()) in drop:
            continue
        out_tables[ti]["columns"].append({"name": name, "type": typ, "unique": False})
        cols[i] = {"table": tables[ti], "column": name}
    fks = [[cols[a], cols[b]] for a, b in d["foreign_keys"] if cols[a] and cols[b]]
    pks = []
    for p in d["primary_keys"]:
        for i in p if isinstance(p, list) else [p]:
            if cols[i]:
                pks.append(cols[i])
    return {"db_id": db_id, "tables": out_tables, "foreign_keys": fks, "primary_keys": pks}


def example(eid, db, q, sql):
    return {"example_id": eid, "db_id": db, "question": q, "query": sql, "split": "train"}


def from_train(eid, idx):
    e = train[idx]
    return example(eid, e["db_id"], e["question"], e["query"])


def step(q, sql, ann):
    return {"sub_question": q, "partial_sql": sql, "skipped": [],
            "annotations": [{"table": t, "column": c, "origin": "parse"} for t, c in ann]}


instr_q = [
    "Find the first names and offices of all instructors.",
    "Find the first names and offices of all instructors who have taught some course.",
    "Find the first names and offices of all instructors who have taught some course and the course description.",
    "Find the first names and offices of all instructors who have taught some course and the course description and the department name.",
]
instr_sql = [
    "SELECT T1.emp_fname ,  T2.prof_office FROM employee AS T1 JOIN professor AS T2 ON T1.emp_num  =  T2.emp_num",
    "SELECT T2.emp_fname ,  T4.prof_office FROM CLASS AS T1 JOIN employee AS T2 ON T1.prof_num  =  T2.emp_num JOIN course AS T3 ON T1.crs_code  =  T3.crs_code JOIN professor AS T4 ON T2.emp_num  =  T4.emp_num ",
    "SELECT T2.emp_fname ,  T4.prof_office ,  T3.crs_description FROM CLASS AS T1 JOIN employee AS T2 ON T1.prof_num  =  T2.emp_num JOIN course AS T3 ON T1.crs_code  =  T3.crs_code JOIN professor AS T4 ON T2.emp_num  =  T4.emp_num",
    "SELECT T2.emp_fname ,  T4.prof_office ,  T3.crs_description ,  T5.dept_name FROM CLASS AS T1 JOIN employee AS T2 ON T1.prof_num  =  T2.emp_num JOIN course AS T3 ON T1.crs_code  =  T3.crs_code JOIN professor AS T4 ON T2.emp_num  =  T4.emp_num JOIN department AS T5 ON T4.dept_code  =  T5.dept_code",
]
grants = train[59]
grants_q = [
    "Find out the send dates of the documents.",
    "Find out the send dates of the documents with the grant amount of more than 5000.",
    grants["question"],
]
grants_sql = [
    "SELECT sent_date FROM documents",
    "SELECT T1.sent_date FROM documents AS T1 JOIN grants AS T2 ON T1.grant_id  =  T2.grant_id WHERE T2.grant_amount  >  5000",
    grants["query"],
]
grants_ann = [
    [("documents", "sent_date")],
    [("grants", "grant_amount"), ("grants", "grant_id")],
    [("organisation_Types", "organisation_type_description"), ("organisation_Types", "organisation_type"),
     ("organisations", "organisation_type"), ("organisations", "organisation_id")],
]

corpus = {
    "schemas": [internal(d) for d in ["medicine_enzyme_interaction", "company_office", "concert_singer",
                                      "culture_company", "college_1", "tracking_grants_for_research"]],
    "examples": [
        from_train("enzymes", 0),
        from_train("industries", 18),
        example("singers", "concert_singer", "How many singers do we have?", "SELECT count(*) FROM singer"),
        from_train("book_club", 32),
        from_train("instructors", 44),
        from_train("grants", 59),
    ],
    "narrations": {
        "book_club": "This query chooses records from the Book_Club table, followed by a WHERE clause that selects records where the year column is greater than 1989. It then groups the results by the category column. It then filters the results where the count of each category is greater than or equal to 2. It then selects the category column."
    },
    "decompositions": {
        "instructors": {"source_example_id": "instructors",
                        "steps": [step(q, s, []) for q, s in zip(instr_q, instr_sql)]},
        "grants": {"source_example_id": "grants",
                   "steps": [step(q, s, a) for q, s, a in zip(grants_q, grants_sql, grants_ann)]},
    },
    "ltm_target_sub_question": "How many singers?",
}

with open(os.path.join(here, "corpus.json"), "w") as f:
    json.dump(corpus, f, indent=1, ensure_ascii=False)
    f.write("\n")
