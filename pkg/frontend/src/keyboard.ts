/** Keyboard mapping for annotation throughput: y/n mark, j/k or arrows move,
 * Enter releases. Pure so the bindings are testable without a DOM. */

export type KeyAction =
  | { kind: 'mark'; hallucinated: 0 | 1 }
  | { kind: 'move'; offset: 1 | -1 }
  | { kind: 'release' }
  | { kind: 'none' };

export function actionForKey(key: string): KeyAction {
  switch (key) {
    case 'y':
    case 'Y':
      return { kind: 'mark', hallucinated: 1 };
    case 'n':
    case 'N':
      return { kind: 'mark', hallucinated: 0 };
    case 'j':
    case 'ArrowDown':
      return { kind: 'move', offset: 1 };
    case 'k':
    case 'ArrowUp':
      return { kind: 'move', offset: -1 };
    case 'Enter':
      return { kind: 'release' };
    default:
      return { kind: 'none' };
  }
}
