import { describe, expect, it } from "vitest";

import { Rational } from "../src/rational";

describe("exact ratios", () => {
  it("prints numerator/denominator verbatim", () => {
    expect(new Rational(17n, 37n).toString()).toBe("17/37");
    expect(new Rational(68n, 148n).toString()).toBe("17/37");
  });

  it("prints integers without a denominator", () => {
    expect(new Rational(0n, 1n).toString()).toBe("0");
    expect(Rational.zero().toString()).toBe("0");
    expect(new Rational(6n, 3n).toString()).toBe("2");
  });

  it("normalizes the sign into the numerator", () => {
    expect(new Rational(1n, -3n).toString()).toBe("-1/3");
    expect(new Rational(-2n, -4n).toString()).toBe("1/2");
  });

  it("rejects a zero denominator", () => {
    expect(() => new Rational(1n, 0n)).toThrow(RangeError);
  });

  it("compares without converting to floats", () => {
    const big = 10n ** 30n;
    const a = new Rational(big, big * 3n);         // exactly 1/3
    const b = new Rational(big + 1n, big * 3n);    // a hair above
    expect(a.compare(b)).toBe(-1);
    expect(b.compare(a)).toBe(1);
    expect(a.compare(new Rational(1n, 3n))).toBe(0);
    expect(a.equals(new Rational(1n, 3n))).toBe(true);
  });

  it("approximates as a number only on demand", () => {
    expect(new Rational(1n, 4n).toNumber()).toBe(0.25);
    expect(new Rational(17n, 37n).toNumber()).toBeCloseTo(0.459459, 6);
  });
});
