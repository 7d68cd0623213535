/**
 * Shortest round-trip float formatting in the convention of the primary
 * interchange writer: fixed notation for decimal exponents in [-4, 16),
 * otherwise scientific with a signed two-digit-minimum exponent, and a
 * trailing ".0" on integer-valued fixed-notation floats.
 *
 * JS toString already produces the shortest round-trip digit string; only
 * the rendering rules differ, so we re-render the same digits.
 */
export function pyFloatRepr(x: number): string {
  if (!Number.isFinite(x)) {
    throw new Error(`cannot format non-finite value ${x}`);
  }
  const sign = x < 0 || Object.is(x, -0) ? "-" : "";
  const s = Math.abs(x).toString();

  // decompose into significant digits and the exponent of the leading digit
  let digits: string;
  let exp: number;
  if (s.includes("e")) {
    const [mant, e] = s.split("e");
    digits = mant.replace(".", "");
    exp = Number(e);
  } else {
    const dot = s.indexOf(".");
    const plain = s.replace(".", "");
    const lead = plain.search(/[1-9]/);
    if (lead === -1) {
      digits = "0";
      exp = 0;
    } else {
      digits = plain.slice(lead);
      exp = (dot === -1 ? s.length : dot) - lead - 1;
    }
  }
  digits = digits.replace(/0+$/, "") || "0";

  if (exp < -4 || exp >= 16) {
    const mant =
      digits.length > 1 ? `${digits[0]}.${digits.slice(1)}` : digits;
    const eSign = exp < 0 ? "-" : "+";
    const eAbs = String(Math.abs(exp)).padStart(2, "0");
    return `${sign}${mant}e${eSign}${eAbs}`;
  }
  if (exp >= digits.length - 1) {
    return `${sign}${digits}${"0".repeat(exp - digits.length + 1)}.0`;
  }
  if (exp >= 0) {
    return `${sign}${digits.slice(0, exp + 1)}.${digits.slice(exp + 1)}`;
  }
  return `${sign}0.${"0".repeat(-exp - 1)}${digits}`;
}
