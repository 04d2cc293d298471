/** Payload shapes of the annotation API; field names mirror the server exactly. */

export interface CaseSummary {
  id: string;
  status: 'pending' | 'done' | 'empty';
  annotated: number;
  total: number;
}

export interface Annotation {
  hallucinated: 0 | 1;
  annotator: string;
}

export interface PointView {
  index: number;
  text: string;
  annotation?: Annotation;
}

export interface RoundView {
  round: number;
  decision: number | string;
  points: PointView[];
}

export interface CaseView {
  id: string;
  attributes: Record<string, string>;
  rounds: RoundView[];
  status: string;
}

export interface Progress {
  annotated: number;
  total: number;
}

/** On-screen guidance for annotators: flag statements that contradict the
 * given attributes; everything needed for the judgment is in the case. */
export const GUIDANCE =
  'Mark a reasoning point as a factual hallucination when it contradicts the ' +
  'attributes shown for this case. The analysis is self-contained: no outside ' +
  'knowledge is needed or allowed.';
