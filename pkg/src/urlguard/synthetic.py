"""Synthetic corpora with planted, known structure for tests and demos.

``make_corpus`` produces labeled, DNS-enriched records over twelve months:

* benign URLs are built from plain English words on mainstream hosting;
* phishing / malware URLs carry planted lexical tokens and are mostly
  hosted on a small set of "bad" networks (low TTL, odd countries);
* a fixed share of malicious URLs ("stealthy") is textually identical in
  distribution to benign URLs and only the hosting gives them away;
* in the last ``drift_months`` months a growing share of malicious URLs
  switches to tokens, TLDs and hosting never seen before.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from .dns.ipindex import IpRange, int_to_ip
from .labeling import Verdict, VerdictRecord, add_months
from .url_core import Label, UrlRecord

WORDS = """
about above account active actor admin advice after again agency album alpha amber angle animal annual answer
apple april archive area arena article artist audio august author autumn avenue award baker balance ballet band
bank basic basket beach bear beauty bedroom berry better bicycle bird black blog blue board boat body book border
bottle brain branch bread bridge bright brother brown budget builder bundle butter button cabin cable camera camp
canal candle canvas capital captain carbon card career cargo carpet castle catalog cedar center chair channel chapter
charity cheese chess chicken choice circle city civic classic clay clean client climate clinic clock cloud club coach
coast coffee collect college color comfort comic common compass concert copper corner cotton council country county
course craft cream credit crystal culture current cycle daily dance data dealer december delta dental design desk
detail dinner direct doctor domain dragon drama dream driver eagle early earth east echo editor effect elder energy
engine event exam expert fabric factory family farm fashion feather festival field figure film finance fire fish
flag flight floor flower focus forest forum frame fresh friend front fruit future galaxy garden gate gallery garage
giant glass global gold golf grand graph green group guide guitar habit harbor harvest health heart helmet herald
hero hill history hobby holiday home honey horizon horse hotel house hunter image index island ivory jacket jazz
jewel journal journey junior kernel kitchen label ladder lake lamp landmark laser layout leader leaf legacy lemon
letter library light linen lion little local lodge logic lunar magnet maple marble market master meadow media
melody member metal meter middle mirror model modern moment monkey morning motor mountain museum music nature
network news night noble north notes novel ocean office olive open orange orbit orchard outdoor owner oxygen paint
palace paper parade park parish pattern peach pencil people pepper photo piano picture pilot pioneer planet plaza
pocket poetry polar pond portal poster prairie press prime print pulse puzzle quality quarter queen quick rabbit
radio rail rainbow ranch reader record region report review ribbon river robot rocket royal rubber safari sailor
salad salon sample school science season second select senior shadow shelter shore silver simple sister sketch
smart social soft solar sound south space spark spring square stable stage station steel stone story studio style
summer sunset supply surf system table talent teacher team temple tennis theory thunder ticket tiger timber today
tower town track trade trail travel tree tribune tropical truck trust tunnel union unity urban valley velvet venture
village vintage vision voice volume voyage wagon walker water weather west wheel window winter wisdom wonder wood
world writer yellow young zebra zone
""".split()

BENIGN_TLDS = (("com", 50), ("org", 12), ("net", 10), ("edu", 5), ("io", 5), ("co.uk", 5), ("de", 5),
               ("gov", 2), ("fr", 3), ("ca", 3))
BAD_TLDS = (("xyz", 10), ("top", 10), ("tk", 8), ("ml", 6), ("ga", 6), ("cf", 5), ("info", 8), ("online", 6),
            ("site", 6), ("club", 5), ("com", 20))
DRIFT_TLDS = (("shop", 10), ("live", 10), ("app", 10), ("cyou", 8), ("sbs", 8), ("com", 15), ("net", 6))

BRANDS = ("paypal", "apple", "microsoft", "amazon", "netflix", "chase", "wellsfargo", "dhl", "office365", "outlook",
          "icloud", "instagram", "facebook", "bankofamerica", "usps")
PHISH_TOKENS = ("login", "signin", "verify", "secure", "account", "update", "confirm", "banking", "auth", "webscr",
                "session", "recovery", "unlock", "billing", "validate", "password")
MALWARE_TOKENS = ("download", "setup", "install", "crack", "keygen", "payload", "bin", "loader", "invoice", "patch",
                  "driver", "flashplayer", "torrent", "free", "mod")
MALWARE_EXTS = (".exe", ".apk", ".zip", ".bin", ".scr", ".jar", ".dll", ".msi", ".rar", ".vbs")
DRIFT_PHISH = ("wallet", "metamask", "airdrop", "claim", "coinbase", "ledger", "seedphrase", "nft", "mint", "bridge",
               "staking", "trezor")
DRIFT_MALWARE = ("onenote", "teamsupdate", "iso", "lnk", "chromepatch", "zoominstaller", "discordnitro", "pdfreader")
DRIFT_EXTS = (".iso", ".lnk", ".one", ".img", ".vhd", ".hta")

# (asn, country, isp). The index gives each network two /24 blocks.
BENIGN_NETS = ((15169, "US", "GOOGLE"), (16509, "US", "AMAZON-02"), (13335, "US", "CLOUDFLARENET"),
               (8075, "US", "MICROSOFT-CORP-MSN-AS-BLOCK"), (24940, "DE", "HETZNER-AS"), (16276, "FR", "OVH"),
               (14618, "US", "AMAZON-AES"), (20940, "NL", "AKAMAI-ASN1"), (54113, "US", "FASTLY"),
               (46606, "US", "UNIFIEDLAYER-AS-1"), (26496, "US", "GO-DADDY-COM-LLC"), (63949, "US", "AKAMAI-LINODE"))
BAD_NETS = ((64500, "RU", "BULLETPROOF-HOSTING-1"), (64501, "CN", "SHADY-CLOUD-CN"), (64502, "PA", "OFFSHORE-VPS"),
            (64503, "SC", "SEYCHELLES-HOST"), (64504, "MD", "MOLDOVA-DC"), (64505, "VG", "ISLAND-NETWORKS"),
            (64506, "HK", "HK-CHEAP-VPS"), (64507, "BZ", "BELIZE-DATA"))
NOVEL_NETS = ((65001, "KZ", "NEWHOST-KZ"), (65002, "AE", "GULF-EDGE"), (65003, "TR", "ANATOLIA-VPS"),
              (65004, "VN", "SAIGON-CLOUD"))

REGISTRY_SUFFIXES = sorted({t for t, _ in BENIGN_TLDS + BAD_TLDS + DRIFT_TLDS} | {"uk", "co.uk", "gov", "mil", "jp"})


def _weighted(rng: random.Random, table):
    items, weights = zip(*table)
    return rng.choices(items, weights=weights)[0]


def network_ranges() -> list[IpRange]:
    """Two /24 blocks per network plus an unrouted block, end-inclusive."""
    ranges = []
    block = 0
    for asn, cc, isp in BENIGN_NETS + BAD_NETS + NOVEL_NETS:
        for _ in range(2):
            start = (23 << 24) + block * 65536
            ranges.append(IpRange(start, start + 255, asn, cc, isp))
            block += 1
    start = (23 << 24) + block * 65536
    ranges.append(IpRange(start, start + 255, 0, "None", "Not routed"))
    return ranges


_RANGES = network_ranges()
_BY_ASN: dict[int, list[IpRange]] = {}
for _r in _RANGES:
    _BY_ASN.setdefault(_r.asn, []).append(_r)


def _ips_on(rng: random.Random, nets, n: int) -> tuple[str, ...]:
    asn = rng.choice(nets)[0]
    out = []
    for _ in range(n):
        # multi-IP answers mostly stay on one network, sometimes spread
        if out and rng.random() < 0.3:
            asn = rng.choice(nets)[0]
        r = rng.choice(_BY_ASN[asn])
        ip = int_to_ip(r.start + rng.randrange(1, 255))
        if ip not in out:
            out.append(ip)
    return tuple(out)


def benign_url(rng: random.Random) -> str:
    scheme = "https" if rng.random() < 0.85 else "http"
    r = rng.random()
    sub = "" if r < 0.4 else ("www." if r < 0.85 else rng.choice(WORDS) + ".")
    r = rng.random()
    if r < 0.5:
        domain = rng.choice(WORDS)
    elif r < 0.85:
        domain = rng.choice(WORDS) + rng.choice(WORDS)
    else:
        domain = rng.choice(WORDS) + "-" + rng.choice(WORDS)
    tld = _weighted(rng, BENIGN_TLDS)
    segs = [rng.choice(WORDS) for _ in range(rng.choice((0, 1, 1, 2, 2, 3)))]
    path = "/" + "/".join(segs) if segs else rng.choice(("", "/"))
    if segs and rng.random() < 0.3:
        path += rng.choice((".html", ".php", ".aspx", "/"))
    return f"{scheme}://{sub}{domain}.{tld}{path}"


def _noise(rng, n=6):
    return "".join(rng.choice("abcdefghijklmnopqrstuvwxyz0123456789") for _ in range(n))


def phishing_url(rng: random.Random, drift: bool = False) -> str:
    tokens = DRIFT_PHISH if drift else PHISH_TOKENS
    brands = DRIFT_PHISH if drift else BRANDS
    scheme = "https" if rng.random() < 0.55 else "http"
    brand = rng.choice(brands)
    if rng.random() < 0.3:
        brand = brand.replace("a", "4", 1).replace("l", "1", 1).replace("o", "0", 1)
    subs = []
    if rng.random() < 0.6:
        subs.append(f"{brand}-{rng.choice(tokens)}")
    if rng.random() < 0.4:
        subs.append(rng.choice(tokens))
    if rng.random() < 0.3:
        subs.append(_noise(rng, rng.randint(4, 10)))
    domain = rng.choice((f"{rng.choice(tokens)}-{rng.choice(WORDS)}", f"{brand}{rng.randint(1, 999)}",
                         f"{rng.choice(WORDS)}-{rng.choice(tokens)}{rng.randint(0, 99)}", _noise(rng, rng.randint(7, 14))))
    tld = _weighted(rng, DRIFT_TLDS if drift else BAD_TLDS)
    segs = [rng.choice(tokens) for _ in range(rng.randint(1, 3))]
    if rng.random() < 0.4:
        segs.insert(0, _noise(rng, rng.randint(8, 16)))
    path = "/" + "/".join(segs)
    if rng.random() < 0.4:
        path += rng.choice((".php", ".html", "/index.php", "/"))
    if rng.random() < 0.1:
        path += "&" + rng.choice(tokens)
    host = ".".join(subs + [domain, tld])
    return f"{scheme}://{host}{path}"


def malware_url(rng: random.Random, drift: bool = False) -> str:
    tokens = DRIFT_MALWARE if drift else MALWARE_TOKENS
    exts = DRIFT_EXTS if drift else MALWARE_EXTS
    scheme = "http" if rng.random() < 0.7 else "https"
    domain = rng.choice((_noise(rng, rng.randint(6, 14)), f"{rng.choice(tokens)}{rng.randint(1, 9999)}",
                         f"{rng.choice(WORDS)}-{rng.choice(tokens)}"))
    sub = rng.choice(("", "", "cdn.", "dl.", "files.", _noise(rng, 5) + "."))
    tld = _weighted(rng, DRIFT_TLDS if drift else BAD_TLDS)
    segs = [rng.choice(tokens + (_noise(rng, 8),)) for _ in range(rng.randint(1, 4))]
    fname = rng.choice(tokens) + rng.choice(("", str(rng.randint(1, 99)), "_" + _noise(rng, 4))) + rng.choice(exts)
    path = "/" + "/".join(segs + [fname])
    if rng.random() < 0.15:
        path = path.replace("/", "/%20", 1)
    return f"{scheme}://{sub}{domain}.{tld}{path}"


@dataclass
class CorpusSpec:
    n: int = 50_000
    seed: int = 0
    start: datetime = datetime(2022, 3, 1, tzinfo=timezone.utc)
    months: int = 12
    drift_months: int = 4
    drift_step: float = 0.15  # novel share of malicious grows by this per drift month
    benign_share: float = 0.6
    phishing_share: float = 0.25  # malware gets the rest
    stealthy_share: float = 0.25
    unresolved_share: float = 0.05


@dataclass
class Corpus:
    records: list = field(default_factory=list)
    ranges: list = field(default_factory=list)
    suffixes: list = field(default_factory=list)


def _dns(rng: random.Random, nets, ttls, max_ips, unresolved_share):
    if rng.random() < unresolved_share:
        return (), 0
    return _ips_on(rng, nets, rng.randint(1, max_ips)), rng.choice(ttls)


BENIGN_TTLS = (300, 600, 1800, 3600, 14400, 86400)
BAD_TTLS = (30, 60, 120, 300)


def make_corpus(spec: CorpusSpec | None = None) -> Corpus:
    spec = spec or CorpusSpec()
    rng = random.Random(spec.seed)
    seen = set()
    records = []
    per_month = spec.n // spec.months
    for m in range(spec.months):
        month_start = add_months(spec.start, m)
        month_len = (add_months(spec.start, m + 1) - month_start).total_seconds()
        drift_idx = m - (spec.months - spec.drift_months)
        novel_share = spec.drift_step * (drift_idx + 1) if drift_idx >= 0 else 0.0
        count = per_month if m < spec.months - 1 else spec.n - per_month * (spec.months - 1)
        made = 0
        while made < count:
            r = rng.random()
            if r < spec.benign_share:
                label = Label.BENIGN
            elif r < spec.benign_share + spec.phishing_share:
                label = Label.PHISHING
            else:
                label = Label.MALWARE

            if label is Label.BENIGN:
                url = benign_url(rng)
                nets = BAD_NETS if rng.random() < 0.03 else BENIGN_NETS
                ips, ttl = _dns(rng, nets, BENIGN_TTLS, 4, spec.unresolved_share)
            elif rng.random() < novel_share:
                url = phishing_url(rng, drift=True) if label is Label.PHISHING else malware_url(rng, drift=True)
                nets = NOVEL_NETS if rng.random() < 0.4 else BENIGN_NETS
                ips, ttl = _dns(rng, nets, BENIGN_TTLS, 4, spec.unresolved_share)
            elif rng.random() < spec.stealthy_share:
                url = benign_url(rng)
                ips, ttl = _dns(rng, BAD_NETS, BAD_TTLS, 3, 0.0)
            else:
                url = phishing_url(rng) if label is Label.PHISHING else malware_url(rng)
                nets = BAD_NETS if rng.random() < 0.8 else BENIGN_NETS
                ips, ttl = _dns(rng, nets, BAD_TTLS, 3, spec.unresolved_share)

            if url in seen:
                continue
            seen.add(url)
            ts = month_start + timedelta(seconds=rng.randrange(int(month_len)))
            records.append(UrlRecord(url, label, ts, ips, ttl))
            made += 1
    return Corpus(records, list(_RANGES), list(REGISTRY_SUFFIXES))


@dataclass
class RawCurationCase:
    rows: list  # dicts with url,label,first_seen,ips,ttl
    expected: dict  # drop counts per reason


def make_raw_curation_rows(n: int = 10_000, *, seed: int = 0, n_ip: int = 150, n_bad_tld: int = 120,
                           n_bad_scheme: int = 130, n_dup: int = 400) -> RawCurationCase:
    """Raw rows with exactly known numbers of each defect; the rest are distinct valid URLs."""
    rng = random.Random(seed)
    base_ts = datetime(2022, 1, 1, tzinfo=timezone.utc)

    def ts():
        return (base_ts + timedelta(seconds=rng.randrange(300 * 86400))).strftime("%Y-%m-%dT%H:%M:%SZ")

    n_valid = n - n_ip - n_bad_tld - n_bad_scheme - n_dup
    valid = []
    seen = set()
    while len(valid) < n_valid:
        url = benign_url(rng) if rng.random() < 0.6 else phishing_url(rng)
        if url in seen:
            continue
        seen.add(url)
        valid.append(url)

    def dress(url):
        # raw-form variation that canonicalizes back to ``url``
        scheme, rest = url.split("://", 1)
        host, slash, path = rest.partition("/")
        r = rng.random()
        if r < 0.2:
            scheme = scheme.upper()
        elif r < 0.4:
            host = host.upper()
        elif r < 0.5:
            host += ":80" if scheme == "http" else ":443"
        tail = rng.choice(("", "", "?q=" + _noise(rng, 4), "#" + _noise(rng, 3), "?a=1&b=2#top", "?"))
        return f"{scheme}://{host}{slash}{path}{tail}"

    def label():
        return rng.choice(("benign", "phishing", "malware"))

    rows = [{"url": dress(u), "label": label(), "first_seen": ts(), "ips": "", "ttl": ""} for u in valid]
    for i in range(n_dup):
        u = valid[rng.randrange(len(valid))]
        rows.append({"url": dress(u), "label": label(), "first_seen": ts(), "ips": "", "ttl": ""})
    for i in range(n_ip):
        ip = f"{rng.randint(1, 223)}.{rng.randint(0, 255)}.{rng.randint(0, 255)}.{rng.randint(1, 254)}"
        rows.append({"url": f"http://{ip}/{rng.choice(WORDS)}", "label": label(), "first_seen": ts(), "ips": "", "ttl": ""})
    bad_tlds = ("zzzz", "notatld", "localdomain", "corp", "lan", "invalidtld")
    for i in range(n_bad_tld):
        rows.append({"url": f"https://{rng.choice(WORDS)}{i}.{rng.choice(bad_tlds)}/{rng.choice(WORDS)}",
                     "label": label(), "first_seen": ts(), "ips": "", "ttl": ""})
    schemes = ("ftp://", "mailto:", "file:///", "", "javascript:", "ws://")
    for i in range(n_bad_scheme):
        rows.append({"url": f"{rng.choice(schemes)}{rng.choice(WORDS)}{i}.com/{rng.choice(WORDS)}",
                     "label": label(), "first_seen": ts(), "ips": "", "ttl": ""})
    rng.shuffle(rows)
    expected = {"no_scheme": n_bad_scheme, "ip_literal": n_ip, "unknown_tld": n_bad_tld, "duplicates": n_dup}
    return RawCurationCase(rows, expected)


def make_verdicts(records, *, seed: int = 0, n_vendors: int = 20, n_good: int = 6) -> list[VerdictRecord]:
    """Vendor verdict rows for labeled records: a few accurate vendors, many noisy ones."""
    rng = random.Random(seed)
    out = []
    for rec in records:
        for v in range(n_vendors):
            vendor = f"vendor{v:02d}"
            good = v < n_good
            if rec.label is Label.BENIGN:
                r = rng.random()
                verdict = Verdict.CLEAN if r < 0.9 else Verdict.UNRATED
                if not good and rng.random() < 0.02:
                    verdict = rng.choice((Verdict.MALICIOUS, Verdict.SUSPICIOUS))
            else:
                truth = Verdict.PHISHING if rec.label is Label.PHISHING else Verdict.MALICIOUS
                p_detect = 0.97 if good else 0.35
                if rng.random() < p_detect:
                    verdict = truth if (good or rng.random() < 0.8) else rng.choice((Verdict.MALICIOUS, Verdict.PHISHING))
                else:
                    verdict = rng.choice((Verdict.CLEAN, Verdict.UNRATED, Verdict.SUSPICIOUS))
            out.append(VerdictRecord(rec.url, vendor, verdict, rec.first_seen))
    return out
