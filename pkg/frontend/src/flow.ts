/** Classification flow state machine, kept free of DOM concerns.
 *
 * One item is on screen at a time; submitting advances to the next
 * unanswered item. A 409 conflict (answer already recorded, e.g. after a
 * refresh race) skips forward; network failures surface as "retry" without
 * losing the pending choice.
 */

import { ApiClient, Label, NextItemResponse } from "./api.js";

export type FlowPhase = "loading" | "classify" | "done" | "error";

export interface FlowState {
  phase: FlowPhase;
  item: NextItemResponse | null;
  answered: number;
  total: number;
  /** Set while a submit that failed on the network is awaiting retry. */
  pendingLabel: Label | null;
  errorMessage: string | null;
}

export class ClassifyFlow {
  state: FlowState = {
    phase: "loading",
    item: null,
    answered: 0,
    total: 0,
    pendingLabel: null,
    errorMessage: null,
  };

  constructor(
    private api: ApiClient,
    readonly sessionId: string,
    readonly readerId: string,
  ) {}

  /** Fetch the next unanswered item (also used to resume after refresh). */
  async advance(): Promise<FlowState> {
    try {
      const item = await this.api.nextItem(this.sessionId, this.readerId);
      this.state = {
        phase: item.done ? "done" : "classify",
        item,
        answered: item.answered,
        total: item.total,
        pendingLabel: null,
        errorMessage: null,
      };
    } catch (err) {
      this.state = {
        ...this.state,
        phase: "error",
        errorMessage: err instanceof Error ? err.message : String(err),
      };
    }
    return this.state;
  }

  /** Submit a label for the current item; keyboard and click both land here. */
  async submit(label: Label): Promise<FlowState> {
    const item = this.state.item;
    if (this.state.phase !== "classify" || !item || !item.item_id) {
      return this.state;
    }
    try {
      const result = await this.api.submit(this.sessionId, this.readerId, item.item_id, label);
      if (result.conflict) {
        // someone (a refresh, another tab) answered this item already: skip on
        return this.advance();
      }
      return this.advance();
    } catch (err) {
      this.state = {
        ...this.state,
        phase: "error",
        pendingLabel: label,
        errorMessage: err instanceof Error ? err.message : String(err),
      };
      return this.state;
    }
  }

  /** Retry a submit that failed on the network, reusing the pending choice. */
  async retry(): Promise<FlowState> {
    if (this.state.pendingLabel !== null && this.state.item?.item_id) {
      const label = this.state.pendingLabel;
      this.state = { ...this.state, phase: "classify", errorMessage: null, pendingLabel: null };
      return this.submit(label);
    }
    return this.advance();
  }
}
