#!/usr/bin/env python3
"""Writes crates/core/data/base_queries.json.

Each entry is {"query": str, "tool_calls": [{"name": str, "args": {...}}]}.
Placeholders are {company} for single-company queries and {company N} for
multi-company ones. Output is deterministic (fixed RNG seed).
"""
import json
import random
import sys
from pathlib import Path

rng = random.Random(20250501)

TIMELINES = {"d": "daily", "w": "weekly", "m": "monthly"}
TARGETS = ["current", "low", "high", "mean", "median"]
YEARS = [2020, 2021, 2022, 2023, 2024]


def call(tool, ph="{company}", **args):
    return {"name": f"get_{ph}_{tool}", "args": args}


def names(n):
    return [f"{{company {i}}}" for i in range(1, n + 1)]


def listing(phs):
    if len(phs) == 2:
        return f"{phs[0]} and {phs[1]}"
    return ", ".join(phs[:-1]) + f", and {phs[-1]}"


def price_single():
    qs = [
        "What is {company}'s stock trading at right now?",
        "Give me the latest share price for {company}.",
        "How much does one share of {company} cost today?",
        "Quote me the current price of {company} stock.",
        "Where is {company} stock priced at the moment?",
        "I need the most recent trading price for {company}.",
        "What's {company} going for on the market right now?",
        "Check the live stock price of {company} for me.",
        "Is {company} trading higher or lower today? Tell me its current price.",
        "Pull up {company}'s current share price.",
        "What did {company} last trade at?",
        "Tell me the present market value of a {company} share.",
    ]
    return [{"query": q, "tool_calls": [call("current_stock_price")]} for q in qs]


def history_single():
    out = []
    phr = {
        "d": ["Show me {company}'s daily closing prices.", "List the last 10 daily closes for {company}.",
              "How has {company} moved day to day recently?", "Give me {company}'s day-by-day price history."],
        "w": ["Show me {company}'s weekly closing prices.", "What are the last 10 weekly closes for {company}?",
              "How has {company} stock trended week over week?", "Pull {company}'s weekly price history."],
        "m": ["Show me {company}'s monthly closing prices.", "What are the last 10 monthly closes for {company}?",
              "How has {company} performed month by month?", "Give me {company}'s monthly stock price history."],
    }
    for t, qs in phr.items():
        out += [{"query": q, "tool_calls": [call("stock_price_history", timeline=t)]} for q in qs]
    out.append({
        "query": "How has {company}'s stock performed on a weekly vs monthly basis?",
        "tool_calls": [call("stock_price_history", timeline="w"), call("stock_price_history", timeline="m")],
    })
    pairs = [("d", "w"), ("d", "m"), ("w", "m")]
    for a, b in pairs:
        out.append({
            "query": f"Compare {{company}}'s {TIMELINES[a]} and {TIMELINES[b]} price trends.",
            "tool_calls": [call("stock_price_history", timeline=a), call("stock_price_history", timeline=b)],
        })
    out.append({
        "query": "Show {company}'s price history at daily, weekly, and monthly resolution.",
        "tool_calls": [call("stock_price_history", timeline=t) for t in "dwm"],
    })
    return out


def targets_single():
    out = []
    phr = [
        "What is the {t} analyst price target for {{company}}?",
        "Give me the {t} forecasted price analysts have for {{company}}.",
        "Where do analysts put {{company}}'s {t} price target?",
    ]
    for t in TARGETS:
        out += [{"query": p.format(t=t), "tool_calls": [call("analyst_price_targets", target_type=t)]} for p in phr]
    combos = [("low", "high"), ("mean", "median"), ("low", "mean", "high"), ("current", "mean"),
              ("low", "median", "high"), ("current", "low", "high", "mean", "median")]
    for c in combos:
        q = f"What are the {listing(list(c)) if len(c) > 1 else c[0]} analyst targets for {{company}}?"
        out.append({"query": q, "tool_calls": [call("analyst_price_targets", target_type=t) for t in c]})
    out.append({"query": "What's the full range of analyst price targets for {company}, from low to high?",
                "tool_calls": [call("analyst_price_targets", target_type=t) for t in ("low", "high")]})
    return out


def yearly_single(tool, label):
    out = []
    phr = [
        "What was {{company}}'s {label} in {y}?",
        "Report {{company}}'s {label} for fiscal {y}.",
    ]
    for y in YEARS:
        out += [{"query": p.format(label=label, y=y), "tool_calls": [call(tool, year=y)]} for p in phr]
    for q in [f"Show me all available {label} data for {{company}}.",
              f"Give me {{company}}'s {label} history by year.",
              f"How has {{company}}'s {label} changed over the years?"]:
        out.append({"query": q, "tool_calls": [call(tool)]})
    for a, b in [(2023, 2024), (2022, 2024), (2020, 2024), (2021, 2022)]:
        out.append({"query": f"Compare {{company}}'s {label} in {a} and {b}.",
                    "tool_calls": [call(tool, year=a), call(tool, year=b)]})
    out.append({"query": f"Track {{company}}'s {label} for 2022, 2023, and 2024.",
                "tool_calls": [call(tool, year=y) for y in (2022, 2023, 2024)]})
    return out


def mixed_single():
    out = []
    for y in (2022, 2023, 2024):
        out.append({"query": f"What were {{company}}'s revenue and net income in {y}?",
                    "tool_calls": [call("revenue", year=y), call("net_income", year=y)]})
        out.append({"query": f"Compute {{company}}'s {y} net margin from its revenue and net income.",
                    "tool_calls": [call("revenue", year=y), call("net_income", year=y)]})
    out.append({"query": "Can you detail a year-over-year comparison of {company 1}'s financial metrics by looking at its 2023 and 2024 revenue and net income?",
                "tool_calls": [call("revenue", "{company 1}", year=2023), call("revenue", "{company 1}", year=2024),
                               call("net_income", "{company 1}", year=2023), call("net_income", "{company 1}", year=2024)]})
    out.append({"query": "Is {company} trading below its mean analyst target? Give me both numbers.",
                "tool_calls": [call("current_stock_price"), call("analyst_price_targets", target_type="mean")]})
    out.append({"query": "How far is {company}'s price from the high analyst target?",
                "tool_calls": [call("current_stock_price"), call("analyst_price_targets", target_type="high")]})
    out.append({"query": "Give me a snapshot of {company}: current price, weekly trend, and the median target.",
                "tool_calls": [call("current_stock_price"), call("stock_price_history", timeline="w"),
                               call("analyst_price_targets", target_type="median")]})
    out.append({"query": "Build a full profile of {company}: current price, monthly history, mean target, and 2024 revenue and net income.",
                "tool_calls": [call("current_stock_price"), call("stock_price_history", timeline="m"),
                               call("analyst_price_targets", target_type="mean"), call("revenue", year=2024),
                               call("net_income", year=2024)]})
    out.append({"query": "Has {company}'s daily price action kept up with its revenue growth from 2023 to 2024?",
                "tool_calls": [call("stock_price_history", timeline="d"), call("revenue", year=2023),
                               call("revenue", year=2024)]})
    return out


def per_company(phs, fns):
    calls = []
    for ph in phs:
        for tool, args in fns:
            calls.append(call(tool, ph, **args))
    return calls


MULTI = [
    ("revenue", {"year": 2024}, "Compare the 2024 revenue of {L} and determine which company achieved the highest revenue."),
    ("revenue", {"year": 2023}, "Which of {L} brought in the most revenue in 2023?"),
    ("revenue", {"year": 2022}, "Rank {L} by 2022 revenue."),
    ("revenue", {}, "Show me the full revenue history for {L}."),
    ("net_income", {"year": 2024}, "Which of {L} had the highest net income in 2024?"),
    ("net_income", {"year": 2023}, "Compare 2023 net income for {L}."),
    ("net_income", {}, "Pull every year of net income data for {L}."),
    ("current_stock_price", {}, "What are the current stock prices of {L}?"),
    ("current_stock_price", {}, "Which is trading highest right now: {L}?"),
    ("stock_price_history", {"timeline": "w"}, "How have {L} moved over recent weeks?"),
    ("stock_price_history", {"timeline": "d"}, "Compare the daily price trends of {L}."),
    ("stock_price_history", {"timeline": "m"}, "Chart the monthly closes of {L} side by side."),
    ("analyst_price_targets", {"target_type": "mean"}, "What are the mean analyst targets for {L}?"),
    ("analyst_price_targets", {"target_type": "high"}, "Which of {L} has the highest bullish analyst target?"),
    ("analyst_price_targets", {"target_type": "median"}, "List the median price targets for {L}."),
    ("revenue", {"year": 2021}, "Put together a table of 2021 revenue for {L}."),
    ("revenue", {"year": 2020}, "How did {L} stack up on 2020 revenue?"),
    ("net_income", {"year": 2022}, "Which of {L} was most profitable in 2022?"),
    ("net_income", {"year": 2021}, "Summarize 2021 net income across {L}."),
    ("current_stock_price", {}, "Give me a price check on {L}."),
    ("current_stock_price", {}, "Line up the latest share prices for {L}."),
    ("stock_price_history", {"timeline": "w"}, "Which of {L} had the strongest weekly trend?"),
    ("stock_price_history", {"timeline": "m"}, "Show the last 10 monthly closes for {L}."),
    ("analyst_price_targets", {"target_type": "low"}, "What are the bearish low targets analysts set for {L}?"),
    ("analyst_price_targets", {"target_type": "current"}, "Collect the current analyst targets for {L}."),
]

MULTI_COMBO = [
    ([("stock_price_history", {"timeline": "w"}), ("analyst_price_targets", {"target_type": "mean"})],
     "How do {L} compare in terms of stock performance and analyst expectations over the past week?"),
    ([("current_stock_price", {}), ("stock_price_history", {"timeline": "w"}), ("analyst_price_targets", {"target_type": "current"})],
     "Analyze the stock performance of {L} by reviewing each company's current stock price, recent weekly price history, and current analyst price targets to determine the best overall performer."),
    ([("revenue", {"year": 2024}), ("net_income", {"year": 2024})],
     "Determine the relative financial strength of {L} by comparing their 2024 net income margins."),
    ([("current_stock_price", {}), ("analyst_price_targets", {"target_type": "mean"})],
     "Which of {L} has the most upside to its mean analyst target?"),
    ([("revenue", {"year": 2023}), ("revenue", {"year": 2024})],
     "Which of {L} grew revenue fastest from 2023 to 2024?"),
]


def multi(primary, sizes):
    out = []
    for tool, args, text in MULTI:
        if tool != primary:
            continue
        for n in sizes:
            phs = names(n)
            out.append({"query": text.replace("{L}", listing(phs)), "tool_calls": per_company(phs, [(tool, args)])})
    return out


def build():
    banks = {
        "current_stock_price": price_single(),
        "stock_price_history": history_single(),
        "analyst_price_targets": targets_single(),
        "revenue": yearly_single("revenue", "revenue"),
        "net_income": yearly_single("net_income", "net income"),
    }
    mixed = mixed_single()
    banks["revenue"] += mixed[:3]
    banks["net_income"] += mixed[3:7]
    banks["current_stock_price"] += mixed[7:10]
    banks["stock_price_history"] += mixed[10:]
    for tool in banks:
        banks[tool] += multi(tool, [2, 3, 4, 5])
    for calls, text in MULTI_COMBO:
        for n in (2, 3, 4):
            phs = names(n)
            banks[calls[0][0]].append({"query": text.replace("{L}", listing(phs)), "tool_calls": per_company(phs, calls)})
    out = []
    for tool in banks:
        out += banks[tool]
    # The 15-company revenue ranking from the multi-company examples.
    phs = names(15)
    out.append({"query": f"Out of the following 15 companies: {listing(phs)}, determine which one reported the highest revenue for 2024.",
                "tool_calls": per_company(phs, [("revenue", {"year": 2024})])})
    return out


PREFIXES = ["Quick question: ", "For a client note, ", "I'm building a watchlist. ", "Help me out here. ",
            "For my portfolio review, ", "Before the market opens, ", "Just curious, ", "For our weekly meeting, ",
            "When you get a chance, ", "For the board deck, ", "As part of my research, ", "Real quick, "]


def lower_first(text):
    return text[0].lower() + text[1:]


def pad(bank, target_mean, per_tool):
    """Adds prefixed phrasing variants until each tool has `per_tool`
    templates: multi-company variants while the mean call count is below
    `target_mean`, variants of short single-company templates otherwise."""
    by_tool = {}
    for q in bank:
        first = q["tool_calls"][0]["name"].split("}_", 1)[1]
        by_tool.setdefault(first, []).append(q)
    out = list(bank)
    seen = {q["query"] for q in out}
    for tool, items in sorted(by_tool.items()):
        heavy = [(pre, m) for pre in PREFIXES for m in MULTI if m[0] == tool]
        light = [(pre, q) for pre in PREFIXES for q in items
                 if len(q["tool_calls"]) <= 2 and "{company}" in q["query"]]
        rng.shuffle(heavy)
        rng.shuffle(light)
        while len(items) < per_tool and (heavy or light):
            mean = sum(len(q["tool_calls"]) for q in out) / len(out)
            if (mean < target_mean and heavy) or not light:
                pre, (tool_name, args, text) = heavy.pop()
                phs = names(rng.choice([6, 7, 8, 9, 10, 11, 12]))
                q = {"query": pre + lower_first(text.replace("{L}", listing(phs))),
                     "tool_calls": per_company(phs, [(tool_name, args)])}
            else:
                pre, base = light.pop()
                q = {"query": pre + lower_first(base["query"]), "tool_calls": base["tool_calls"]}
            if q["query"] in seen:
                continue
            seen.add(q["query"])
            items.append(q)
            out.append(q)
    return out


def main():
    bank = pad(build(), target_mean=5.0, per_tool=100)
    dest = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "crates/core/data/base_queries.json"
    dest.write_text(json.dumps(bank, indent=1) + "\n")
    hops = [len(q["tool_calls"]) for q in bank]
    print(f"{len(bank)} base queries, mean calls {sum(hops) / len(hops):.3f}, max {max(hops)}")


if __name__ == "__main__":
    main()
