"""Writes upstream.json: the simulated OSV + registry dataset behind the replay corpus."""
import json
from datetime import datetime, timedelta, timezone

START = datetime(2023, 1, 2, tzinfo=timezone.utc)


def releases(versions, yanked=(), undated=()):
    out = []
    for i, v in enumerate(versions):
        r = {"version": v}
        if v not in undated:
            r["released_at"] = (START + timedelta(days=7 * i)).strftime("%Y-%m-%dT%H:%M:%SZ")
        if v in yanked:
            r["yanked"] = True
        out.append(r)
    return out


packages = [
    ("npm", "vite", [f"0.1.{i}" for i in range(13)] + ["1.0.0-beta.1"], ()),
    ("npm", "lodash", ["4.17.0", "4.17.4", "4.17.11", "4.17.15", "4.17.19", "4.17.20", "4.17.21"], ()),
    ("npm", "@babel/traverse", ["7.22.0", "7.22.5", "7.22.20", "7.23.0", "7.23.2"], ()),
    ("PyPI", "requests", [f"2.{m}.0" for m in range(25, 32)], ()),
    ("PyPI", "tornado", ["6.3", "6.3.1", "6.3.2", "6.4", "6.4.1", "6.5b1"], ("6.4.1",)),
    ("Maven", "org.springframework:spring-expression", [f"5.3.{i}" for i in range(0, 21, 2)], ()),
    ("Maven", "org.apache.logging.log4j:log4j-core", ["2.14.0", "2.14.1", "2.15.0", "2.16.0", "2.17.0"], ()),
    ("NuGet", "Newtonsoft.Json", [f"9.0.{i}" for i in range(1, 71)], ()),
    ("NuGet", "System.Text.Encodings.Web", ["4.5.0", "4.5.1", "5.0.0", "5.0.1"], ("5.0.1",)),
]

pkgs = [{"ecosystem": e, "name": n, "releases": releases(vs, y)} for e, n, vs, y in packages]

advisories = [
    ("GHSA-vg6x-rcgg-rjx6", ["CVE-2025-24010"], "npm", "vite", [f"0.1.{i}" for i in range(13)]),
    ("GHSA-64vr-g452-qvp3", ["CVE-2025-30208"], "npm", "vite", [f"0.1.{i}" for i in range(8, 13)]),
    ("GHSA-x574-m823-4x7w", ["CVE-2025-31125"], "npm", "vite", [f"0.1.{i}" for i in range(10, 13)]),
    ("GHSA-4r6h-8v6p-xvw6", ["CVE-2025-31486"], "npm", "vite", ["0.1.11", "0.1.12"]),
    ("GHSA-xcj6-pq6g-qj4x", ["CVE-2025-32395"], "npm", "vite", ["0.1.12"]),
    ("GHSA-859w-5945-r5v3", [], "npm", "vite", ["0.1.12"]),
    ("GHSA-p6mc-m468-83gw", ["CVE-2020-8203"], "npm", "lodash", ["4.17.0", "4.17.4", "4.17.11", "4.17.15", "4.17.19"]),
    ("GHSA-35jh-r3h4-6jhm", ["CVE-2021-23337"], "npm", "lodash", ["4.17.0", "4.17.4", "4.17.11", "4.17.15", "4.17.19", "4.17.20"]),
    ("GHSA-67hx-6x53-jw92", ["CVE-2023-45133"], "npm", "@babel/traverse", ["7.22.0", "7.22.5", "7.22.20", "7.23.0"]),
    ("GHSA-j8r2-6x86-q33q", ["CVE-2023-32681", "PYSEC-2023-74"], "PyPI", "requests", ["2.25.0", "2.26.0", "2.27.0", "2.28.0", "2.29.0", "2.30.0"]),
    ("GHSA-9wx4-h78v-vm56", ["CVE-2024-35195"], "PyPI", "requests", [f"2.{m}.0" for m in range(25, 32)]),
    ("PYSEC-2023-175", [], "PyPI", "tornado", ["6.3", "6.3.1", "6.3.2"]),
    ("GHSA-753j-mpmx-qq6g", ["CVE-2024-52804"], "PyPI", "tornado", ["6.3", "6.3.1", "6.3.2", "6.4", "6.4.1"]),
    ("GHSA-558x-2xjg-6232", ["CVE-2023-20861"], "Maven", "org.springframework:spring-expression", [f"5.3.{i}" for i in range(0, 21, 2)]),
    ("GHSA-564r-hj7v-mcr5", ["CVE-2023-20863"], "Maven", "org.springframework:spring-expression", [f"5.3.{i}" for i in range(0, 21, 2)]),
    ("GHSA-jjjh-jjxp-wpff", ["CVE-2022-22950"], "Maven", "org.springframework:spring-expression", [f"5.3.{i}" for i in range(0, 16, 2)]),
    ("GHSA-jfh8-c2jp-5v3q", ["CVE-2021-44228"], "Maven", "org.apache.logging.log4j:log4j-core", ["2.14.0", "2.14.1"]),
    ("GHSA-7rjr-3q55-vv33", ["CVE-2021-45046"], "Maven", "org.apache.logging.log4j:log4j-core", ["2.14.0", "2.14.1", "2.15.0"]),
    ("GHSA-p6xc-xr62-6r2g", ["CVE-2021-45105"], "Maven", "org.apache.logging.log4j:log4j-core", ["2.14.0", "2.14.1", "2.15.0", "2.16.0"]),
    ("GHSA-8489-44mv-ggj8", ["CVE-2021-44832"], "Maven", "org.apache.logging.log4j:log4j-core", ["2.14.0", "2.14.1", "2.15.0", "2.16.0", "2.17.0"]),
    ("GHSA-5crp-9r3c-p9vr", ["CVE-2024-21907"], "NuGet", "Newtonsoft.Json", [f"9.0.{i}" for i in range(1, 71)]),
    ("GHSA-ghhp-997w-qr28", ["CVE-2021-26701"], "NuGet", "System.Text.Encodings.Web", ["4.5.0", "5.0.0"]),
]

advs = [
    {"id": i, "aliases": a, "modified": "2026-03-01T00:00:00Z",
     "affected": [{"ecosystem": e, "name": n, "versions": vs}]}
    for i, a, e, n, vs in advisories
]

with open("upstream.json", "w") as f:
    json.dump({"packages": pkgs, "advisories": advs}, f, indent=1)
    f.write("\n")
