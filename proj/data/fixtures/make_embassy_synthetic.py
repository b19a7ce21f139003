"""Writes embassy_synthetic.csv: 12 weeks of smooth hourly PM data with gaps.

No randomness; rerunning reproduces the committed file byte for byte.
"""
import math
from datetime import datetime, timedelta
from pathlib import Path

HOURS = 2016
START = datetime(2020, 5, 1)
FAULT = (datetime(2020, 6, 10), datetime(2020, 6, 13))  # inflated readings, excluded in the sample config
ABSENT = {500, 501, 1200}                                # rows missing from the file entirely

PM25_TABLE = [(0.0, 12.0, 0, 50), (12.1, 35.4, 51, 100), (35.5, 55.4, 101, 150),
              (55.5, 150.4, 151, 200), (150.5, 250.4, 201, 300), (250.5, 350.4, 301, 400),
              (350.5, 500.4, 401, 500)]


def pm25_aqi(c):
    prev = None
    for lo, hi, alo, ahi in PM25_TABLE:
        if c <= hi:
            if c >= lo:
                return alo + (ahi - alo) * (c - lo) / (hi - lo)
            plo, pahi = prev
            return pahi + (alo - pahi) * (c - plo) / (lo - plo)
        prev = (hi, ahi)
    return 500.0


def main():
    out = ["datetime,pm25,pm10,aqi"]
    for t in range(HOURS):
        if t in ABSENT:
            continue
        when = START + timedelta(hours=t)
        pm25 = (48 + 28 * math.sin(2 * math.pi * (t - 8) / 24) + 14 * math.sin(2 * math.pi * t / 168)
                + 4 * math.cos(t / 97))
        pm10 = 1.7 * pm25 + 20 + 10 * math.sin(2 * math.pi * (t - 3) / 24)
        if FAULT[0] <= when < FAULT[1]:
            pm25 *= 3
            pm10 *= 3
        p25 = "" if t % 97 == 13 or 1500 <= t < 1505 else f"{pm25:.1f}"
        p10 = "" if t % 131 == 7 else f"{pm10:.1f}"
        aqi = "" if p25 == "" else str(int(math.floor(pm25_aqi(float(p25)) + 0.5)))
        out.append(f"{when:%Y-%m-%d %H:%M},{p25},{p10},{aqi}")
    Path(__file__).with_name("embassy_synthetic.csv").write_text("\n".join(out) + "\n")


if __name__ == "__main__":
    main()
