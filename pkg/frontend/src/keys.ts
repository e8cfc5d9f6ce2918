/** Keyboard bindings. These are declared here, not copied from any other
 * tool; the help panel in index.html must list the same table. */

export type UiAction =
  | { kind: "step"; delta: number }
  | { kind: "cycleLabel"; dir: 1 | -1 }
  | { kind: "cyclePrimary"; dir: 1 | -1 }
  | { kind: "cycleOverlay"; dir: 1 | -1 }
  | { kind: "togglePlay" }
  | { kind: "togglePauseAtAnnotated" }
  | { kind: "toggleTraceStyle" }
  | { kind: "guess" }
  | { kind: "confirmGuess" }
  | { kind: "cancelGuess" }
  | { kind: "deletePoint" }
  | { kind: "save" };

export function actionForKey(key: string, shift: boolean): UiAction | null {
  switch (key) {
    case "ArrowLeft":
      return { kind: "step", delta: shift ? -10 : -1 };
    case "ArrowRight":
      return { kind: "step", delta: shift ? 10 : 1 };
    case "[":
      return { kind: "cycleLabel", dir: -1 };
    case "]":
      return { kind: "cycleLabel", dir: 1 };
    case "p":
      return { kind: "cyclePrimary", dir: 1 };
    case "P":
      return { kind: "cyclePrimary", dir: -1 };
    case "o":
      return { kind: "cycleOverlay", dir: 1 };
    case "O":
      return { kind: "cycleOverlay", dir: -1 };
    case " ":
      return { kind: "togglePlay" };
    case "a":
      return { kind: "togglePauseAtAnnotated" };
    case "t":
      return { kind: "toggleTraceStyle" };
    case "g":
      return { kind: "guess" };
    case "Enter":
      return { kind: "confirmGuess" };
    case "Escape":
      return { kind: "cancelGuess" };
    case "Delete":
    case "Backspace":
      return { kind: "deletePoint" };
    case "s":
      return { kind: "save" };
    default:
      return null;
  }
}
