/** Notation helpers: pretty display of ascii formulas and a local
 * well-formedness check so typos never cost a network round trip.
 * Validation only; the server performs all actual reasoning. */

export const RULES: { id: string; arity: number; name: string }[] = [
  { id: "MP", arity: 2, name: "Modus Ponens" },
  { id: "MT", arity: 2, name: "Modus Tollens" },
  { id: "Conj", arity: 2, name: "Conjunction" },
  { id: "Simp", arity: 1, name: "Simplification" },
  { id: "Add", arity: 1, name: "Addition" },
  { id: "DS", arity: 2, name: "Disjunctive Syllogism" },
  { id: "HS", arity: 2, name: "Hypothetical Syllogism" },
  { id: "CD", arity: 2, name: "Constructive Dilemma" },
  { id: "Impl", arity: 1, name: "Implication" },
  { id: "DN", arity: 1, name: "Double Negation" },
  { id: "CP", arity: 1, name: "Contraposition" },
  { id: "Com", arity: 1, name: "Commutation" },
  { id: "Assoc", arity: 1, name: "Associativity" },
  { id: "Dist", arity: 1, name: "Distribution" },
  { id: "Equiv", arity: 1, name: "Equivalence" },
  { id: "DeM", arity: 1, name: "De Morgan" },
];

export function ruleArity(ruleId: string): number {
  const rule = RULES.find((r) => r.id === ruleId);
  return rule ? rule.arity : 0;
}

/** ascii notation to display glyphs (the server accepts both). */
export function toDisplay(text: string): string {
  return text
    .replace(/<>/g, "↔")
    .replace(/~/g, "¬")
    .replace(/\*/g, "∧")
    .replace(/\+/g, "∨")
    .replace(/>/g, "→")
    .replace(/&/g, "∧")
    .replace(/\|/g, "∨");
}

type Token = { kind: string; pos: number };

const SINGLE: Record<string, string> = {
  "(": "(",
  ")": ")",
  "~": "not",
  "-": "not",
  "¬": "not",
  "*": "and",
  "&": "and",
  "∧": "and",
  "+": "or",
  "|": "or",
  "∨": "or",
  ">": "impl",
  "→": "impl",
  "↔": "iff",
};

function tokenize(text: string): Token[] | string {
  const tokens: Token[] = [];
  for (let i = 0; i < text.length; i++) {
    const ch = text[i];
    if (/\s/.test(ch)) continue;
    if (ch >= "A" && ch <= "Z") {
      tokens.push({ kind: "var", pos: i });
    } else if (ch === "<" && text[i + 1] === ">") {
      tokens.push({ kind: "iff", pos: i });
      i++;
    } else if (ch in SINGLE) {
      tokens.push({ kind: SINGLE[ch], pos: i });
    } else {
      return `unexpected character '${ch}' at position ${i}`;
    }
  }
  return tokens;
}

/** Returns null for a well-formed formula, else a short error message.
 * Mirrors the server grammar: ~ binds tightest, then * + > <>, with
 * parentheses for grouping. */
export function validateFormula(text: string): string | null {
  if (!text.trim()) return "enter a statement first";
  const tokens = tokenize(text);
  if (typeof tokens === "string") return tokens;
  let pos = 0;

  function atom(): string | null {
    const token = tokens[pos] as Token | undefined;
    if (!token) return "statement ends too early";
    if (token.kind === "not") {
      pos++;
      return atom();
    }
    if (token.kind === "var") {
      pos++;
      return null;
    }
    if (token.kind === "(") {
      pos++;
      const err = expr();
      if (err) return err;
      const closing = tokens[pos] as Token | undefined;
      if (!closing || closing.kind !== ")") return "missing ')'";
      pos++;
      return null;
    }
    return `misplaced operator at position ${token.pos}`;
  }

  function expr(): string | null {
    const err = atom();
    if (err) return err;
    const token = tokens[pos] as Token | undefined;
    if (token && ["and", "or", "impl", "iff"].includes(token.kind)) {
      pos++;
      return expr();
    }
    return null;
  }

  const err = expr();
  if (err) return err;
  if (pos !== tokens.length) return `unexpected input at position ${tokens[pos].pos}`;
  return null;
}
