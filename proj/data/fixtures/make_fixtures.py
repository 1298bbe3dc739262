#!/usr/bin/env python3
"""Regenerates the synthetic fixture datasets and their expected statistics.

The counts in expected_stats.json are computed here, independently of the
C++ loaders, and the tests compare against them.

    python3 data/fixtures/make_fixtures.py
"""
import json
import random
import statistics
from pathlib import Path

HERE = Path(__file__).resolve().parent

# domain -> intent -> list of (template, {slot placeholder: slot type})
GRAMMAR = {
    "reminder": {
        "CREATE_REMINDER": [
            ("remind me to {todo} {date_time}", {"todo": "TODO", "date_time": "DATE_TIME"}),
            ("set up a reminder to {todo} {date_time}", {"todo": "TODO", "date_time": "DATE_TIME"}),
            ("please remind {person} to {todo}", {"person": "PERSON_REMINDED", "todo": "TODO"}),
        ],
        "GET_REMINDER": [
            ("show my reminders {date_time}", {"date_time": "DATE_TIME"}),
            ("what reminders do i have", {}),
        ],
        "DELETE_REMINDER": [
            ("delete the reminder to {todo}", {"todo": "TODO"}),
        ],
    },
    "alarm": {
        "CREATE_ALARM": [
            ("wake me up {date_time}", {"date_time": "DATE_TIME"}),
            ("set an alarm {date_time} called {alarm_name}", {"date_time": "DATE_TIME", "alarm_name": "ALARM_NAME"}),
        ],
        "SILENCE_ALARM": [
            ("turn off the alarm", {}),
            ("stop the {alarm_name} alarm", {"alarm_name": "ALARM_NAME"}),
        ],
        "GET_ALARM": [
            ("which alarms are set {date_time}", {"date_time": "DATE_TIME"}),
        ],
    },
    "weather": {
        "GET_WEATHER": [
            ("what is the weather in {location} {date_time}", {"location": "LOCATION", "date_time": "DATE_TIME"}),
            ("will it be {attribute} in {location}", {"attribute": "WEATHER_ATTRIBUTE", "location": "LOCATION"}),
            ("is it {attribute} outside", {"attribute": "WEATHER_ATTRIBUTE"}),
        ],
        "GET_SUNRISE": [
            ("when is sunrise in {location}", {"location": "LOCATION"}),
        ],
    },
    "music": {
        "PLAY_MUSIC": [
            ("play {artist} songs", {"artist": "MUSIC_ARTIST_NAME"}),
            ("put on some {genre} music", {"genre": "MUSIC_GENRE"}),
            ("play {track} by {artist}", {"track": "MUSIC_TRACK_TITLE", "artist": "MUSIC_ARTIST_NAME"}),
        ],
        "PAUSE_MUSIC": [
            ("pause the music", {}),
        ],
    },
    "messaging": {
        "SEND_MESSAGE": [
            ("text {recipient} that {content}", {"recipient": "RECIPIENT", "content": "CONTENT_EXACT"}),
            ("send a message to {recipient}", {"recipient": "RECIPIENT"}),
        ],
        "GET_MESSAGE": [
            ("read my messages from {sender}", {"sender": "SENDER"}),
            ("do i have new messages", {}),
        ],
    },
    "calendar": {
        "CREATE_CALL": [
            ("call {contact} {date_time}", {"contact": "CONTACT", "date_time": "DATE_TIME"}),
        ],
        "GET_EVENT": [
            ("what is on my calendar {date_time}", {"date_time": "DATE_TIME"}),
            ("when is the {event} {date_time}", {"event": "EVENT_NAME", "date_time": "DATE_TIME"}),
        ],
    },
    "timer": {
        "CREATE_TIMER": [
            ("set a timer for {duration}", {"duration": "METHOD_TIMER_DURATION"}),
            ("start a {duration} timer named {name}", {"duration": "METHOD_TIMER_DURATION", "name": "TIMER_NAME"}),
        ],
        "PAUSE_TIMER": [
            ("pause the timer", {}),
        ],
    },
    "news": {
        "GET_STORIES_NEWS": [
            ("show me news about {topic}", {"topic": "NEWS_TOPIC"}),
            ("what are the headlines from {source}", {"source": "NEWS_SOURCE"}),
            ("any {topic} news from {source} {date_time}", {"topic": "NEWS_TOPIC", "source": "NEWS_SOURCE", "date_time": "DATE_TIME"}),
        ],
    },
}

VALUES = {
    "todo": ["message mike", "buy milk", "call the dentist", "water the plants", "pay rent"],
    "date_time": ["at 7pm tonight", "tomorrow", "at 6 am", "on friday", "next week", "this evening"],
    "person": ["john", "my sister", "dad"],
    "alarm_name": ["gym", "work", "medicine"],
    "location": ["london", "new york", "paris", "tokyo"],
    "attribute": ["rainy", "sunny", "windy", "cold"],
    "artist": ["adele", "the beatles", "drake"],
    "genre": ["jazz", "rock", "classical"],
    "track": ["hello", "yesterday", "hotline bling"],
    "recipient": ["mom", "alex", "the team"],
    "content": ["i am running late", "see you soon", "call me back"],
    "sender": ["alex", "my boss", "mom"],
    "contact": ["grandma", "alex", "the office"],
    "event": ["concert", "meeting", "dinner party"],
    "duration": ["ten minutes", "one hour", "30 seconds"],
    "name": ["pasta", "laundry", "tea"],
    "topic": ["sports", "politics", "science"],
    "source": ["bbc", "cnn", "reuters"],
}

# Fixed AMR skeletons for the hand-annotated demonstrations, per intent.
AMR = {
    "CREATE_REMINDER": '(r / remind-01 :ARG0 (y / you) :ARG1 (i / i) :ARG2 (t / thing :mod "{v0}"))',
    "GET_REMINDER": '(s / show-01 :ARG0 (y / you) :ARG1 (r / reminder :poss (i / i)))',
    "DELETE_REMINDER": '(d / delete-01 :ARG0 (y / you) :ARG1 (r / reminder :topic "{v0}"))',
    "CREATE_ALARM": '(s / set-02 :ARG0 (y / you) :ARG1 (a / alarm :time "{v0}"))',
    "SILENCE_ALARM": '(s / stop-01 :ARG0 (y / you) :ARG1 (a / alarm))',
    "GET_ALARM": '(a / alarm :ARG1-of (s / set-02) :time "{v0}")',
    "GET_WEATHER": '(w / weather :location (c / city :name "{v0}"))',
    "GET_SUNRISE": '(s / sunrise :location (c / city :name "{v0}"))',
    "PLAY_MUSIC": '(p / play-11 :ARG0 (y / you) :ARG2 (m / music :mod "{v0}"))',
    "PAUSE_MUSIC": '(p / pause-01 :ARG0 (y / you) :ARG1 (m / music))',
    "SEND_MESSAGE": '(s / send-01 :ARG0 (y / you) :ARG1 (m / message) :ARG2 (p / person :name "{v0}"))',
    "GET_MESSAGE": '(r / read-01 :ARG0 (y / you) :ARG1 (m / message :poss (i / i)))',
    "CREATE_CALL": '(c / call-02 :ARG0 (y / you) :ARG1 (p / person :name "{v0}"))',
    "GET_EVENT": '(e / event :time "{v0}" :poss (i / i))',
    "CREATE_TIMER": '(s / set-02 :ARG0 (y / you) :ARG1 (t / timer :duration "{v0}"))',
    "PAUSE_TIMER": '(p / pause-01 :ARG0 (y / you) :ARG1 (t / timer))',
    "GET_STORIES_NEWS": '(s / show-01 :ARG0 (y / you) :ARG1 (n / news :topic "{v0}"))',
}

PER_DOMAIN = 40
ANNOTATED_PER_DOMAIN = 8


def logic_form(intent, slots):
    return "[IN:" + intent + "".join(f" [SL:{t}: {v}]" for t, v in slots) + "]"


def generate(rng):
    records = []
    for domain in sorted(GRAMMAR):
        intents = GRAMMAR[domain]
        for i in range(PER_DOMAIN):
            intent = sorted(intents)[i % len(intents)]
            template, slot_map = rng.choice(intents[intent])
            filled = {key: rng.choice(VALUES[key]) for key in slot_map}
            utterance = template.format(**filled)
            # Slots ordered by position in the utterance.
            keys = sorted(slot_map, key=lambda key: template.index("{" + key + "}"))
            slots = [(slot_map[key], filled[key]) for key in keys]
            rec = {
                "id": f"{domain}-{i:03d}",
                "utterance": utterance,
                "domain": domain,
                "gold": logic_form(intent, slots),
            }
            if i < ANNOTATED_PER_DOMAIN:
                first = slots[0][1] if slots else domain
                rec["step_annotations"] = {
                    "amr_text": AMR[intent].format(v0=first),
                    "intent": intent,
                    "slot_values": [v for _, v in slots],
                    "slot_pairs": [[t, v] for t, v in slots],
                    "logic_form": logic_form(intent, slots),
                }
            records.append((rec, intent, [t for t, _ in slots]))
    return records


def stats(rows):
    """rows: (domain, n_tokens, intents, slot_types) per record."""
    lengths = [r[1] for r in rows]
    n_slots = [len(r[3]) for r in rows]
    return {
        "n_records": len(rows),
        "n_domains": len({r[0] for r in rows}),
        "n_intents": len({i for r in rows for i in r[2]}),
        "n_slot_types": len({s for r in rows for s in r[3]}),
        "sentence_length_mean": statistics.fmean(lengths),
        "sentence_length_std": statistics.pstdev(lengths),
        "slots_per_sample_mean": statistics.fmean(n_slots),
        "slots_per_sample_std": statistics.pstdev(n_slots),
    }


MTOP_ROWS = [
    # id, utterance, domain, decoupled form (nested forms are kept as-is)
    ("m1", "set a reminder to call mom at 5pm", "reminder",
     "[IN:CREATE_REMINDER [SL:TODO call mom ] [SL:DATE_TIME at 5pm ] ]"),
    ("m2", "what's the weather in boston", "weather", "[IN:GET_WEATHER [SL:LOCATION boston ] ]"),
    ("m3", "remind me to text alex that i am late", "reminder",
     "[IN:CREATE_REMINDER [SL:TODO [IN:SEND_MESSAGE [SL:RECIPIENT alex ] [SL:CONTENT_EXACT i am late ] ] ] ]"),
    ("m4", "play some jazz", "music", "[IN:PLAY_MUSIC [SL:MUSIC_GENRE jazz ] ]"),
    ("m5", "pause", "music", "[IN:PAUSE_MUSIC ]"),
    ("m6", "message dad happy birthday", "messaging",
     "[IN:SEND_MESSAGE [SL:RECIPIENT dad ] [SL:CONTENT_EXACT happy birthday ] ]"),
    ("m7", "set an alarm for my sister's flight", "alarm",
     "[IN:CREATE_ALARM [SL:ALARM_NAME [IN:GET_EVENT [SL:ATTENDEE_EVENT my sister ] [SL:NAME_EVENT flight ] ] ] ]"),
]

MASSIVE_ROWS = [
    ("1", "en-US", "alarm", "alarm_set", "wake me up at nine am on friday",
     "wake me up at [time : nine am] on [date : friday]"),
    ("2", "en-US", "weather", "weather_query", "is it going to rain in paris",
     "is it going to [weather_descriptor : rain] in [place_name : paris]"),
    ("3", "en-US", "music", "play_music", "play the beatles",
     "play [artist_name : the beatles]"),
    ("4", "de-DE", "music", "play_music", "spiel die beatles", "spiel [artist_name : die beatles]"),
    ("5", "en-US", "general", "general_joke", "tell me a joke", "tell me a joke"),
    ("6", "en-US", "alarm", "alarm_query", "what alarms do i have", "what alarms do i have"),
]


def main():
    rng = random.Random(20231015)
    records = generate(rng)
    with open(HERE / "native_small.jsonl", "w") as f:
        for rec, _, _ in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
    native_rows = [(r["domain"], len(r["utterance"].split()), [i], st) for r, i, st in records]

    import re
    label = re.compile(r"\[(IN|SL):([^\s\]\[:]+)")
    with open(HERE / "mtop_small.tsv", "w") as f:
        for rid, utt, dom, form in MTOP_ROWS:
            intent = label.search(form).group(2)
            f.write("\t".join([rid, "IN:" + intent, "", utt, dom, "en_XX", form, "{}"]) + "\n")
    mtop_rows = []
    for _, utt, dom, form in MTOP_ROWS:
        found = label.findall(form)
        mtop_rows.append((dom, len(utt.split()), [n for k, n in found if k == "IN"], [n for k, n in found if k == "SL"]))

    with open(HERE / "massive_small.jsonl", "w") as f:
        for rid, loc, scen, intent, utt, annot in MASSIVE_ROWS:
            f.write(json.dumps({"id": rid, "locale": loc, "partition": "test", "scenario": scen,
                                "intent": intent, "utt": utt, "annot_utt": annot}) + "\n")
    slot = re.compile(r"\[([^:\]]+?)\s*:")
    massive_rows = [(scen, len(utt.split()), [intent], slot.findall(annot))
                    for _, loc, scen, intent, utt, annot in MASSIVE_ROWS if loc == "en-US"]

    expected = {
        "native_small.jsonl": {
            **stats(native_rows),
            "n_examples": len(records),
            "n_annotated": sum(1 for r, _, _ in records if "step_annotations" in r),
            "domain_examples": {d: sum(1 for r in native_rows if r[0] == d) for d in sorted(GRAMMAR)},
        },
        "mtop_small.tsv": {
            **stats(mtop_rows),
            "n_examples": sum(1 for *_, form in MTOP_ROWS if form.count("[IN:") == 1),
            "n_nested_skipped": sum(1 for *_, form in MTOP_ROWS if form.count("[IN:") > 1),
        },
        "massive_small.jsonl": {
            **stats(massive_rows),
            "n_examples": len(massive_rows),
            "n_locale_skipped": sum(1 for row in MASSIVE_ROWS if row[1] != "en-US"),
        },
    }
    with open(HERE / "expected_stats.json", "w") as f:
        json.dump(expected, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
