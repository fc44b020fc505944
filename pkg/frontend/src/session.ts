// Editing session for one video: the in-progress annotation draft, an
// undo stack of whole-draft snapshots, and the dirty flag that gates the
// save button.  Every mutating method snapshots first, so N undos after N
// edits always land back on the empty draft.

import { areaUm2, perimeterUm, projectOntoPolyline } from "./geometry.js";
import type { Point } from "./geometry.js";
import type { AnnotationDoc, CellLabel, NeuriteNode, SchemaError, Termination } from "./schema.js";
import { validateAnnotation } from "./schema.js";

interface DraftCell {
  id: string;
  label: CellLabel;
  polygon: Point[];
  long_axis: [Point, Point] | null;
  center: Point;
}

export interface Draft {
  source: string;
  px_per_micron: number;
  cells: DraftCell[];
  neurites: NeuriteNode[];
}

export class EditError extends Error {}

function emptyDraft(source: string, pxPerMicron: number): Draft {
  return { source, px_per_micron: pxPerMicron, cells: [], neurites: [] };
}

export class Session {
  readonly videoId: string;
  frameIndex = 0;
  dirty = false;
  private draft: Draft;
  private undoStack: string[] = [];
  private nextCell = 1;
  private nextNeurite = 1;

  constructor(videoId: string, pxPerMicron: number, source?: string) {
    this.videoId = videoId;
    this.draft = emptyDraft(source ?? videoId, pxPerMicron);
  }

  get cells(): readonly DraftCell[] {
    return this.draft.cells;
  }

  get neurites(): readonly NeuriteNode[] {
    return this.draft.neurites;
  }

  get undoDepth(): number {
    return this.undoStack.length;
  }

  private snapshot(): void {
    this.undoStack.push(JSON.stringify(this.draft));
    this.dirty = true;
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (prev === undefined) {
      return false;
    }
    this.draft = JSON.parse(prev) as Draft;
    this.dirty = true;
    return true;
  }

  isEmpty(): boolean {
    return this.draft.cells.length === 0 && this.draft.neurites.length === 0;
  }

  private cell(cellId: string): DraftCell {
    const cell = this.draft.cells.find((c) => c.id === cellId);
    if (!cell) {
      throw new EditError(`unknown cell '${cellId}'`);
    }
    return cell;
  }

  private trace(traceId: string): NeuriteNode {
    const stack = [...this.draft.neurites];
    while (stack.length > 0) {
      const node = stack.pop()!;
      if (node.id === traceId) {
        return node;
      }
      stack.push(...(node.branches ?? []));
    }
    throw new EditError(`unknown neurite '${traceId}'`);
  }

  /** Place a numbered center marker, creating a new cell body record. */
  addCell(center: Point, label: CellLabel = "neuron"): string {
    this.snapshot();
    const id = `c${this.nextCell++}`;
    this.draft.cells.push({ id, label, polygon: [], long_axis: null, center });
    return id;
  }

  setCellLabel(cellId: string, label: CellLabel): void {
    this.cell(cellId); // existence check before the undo snapshot
    this.snapshot();
    this.cell(cellId).label = label;
  }

  addBodyPoint(cellId: string, point: Point): void {
    this.cell(cellId);
    this.snapshot();
    this.cell(cellId).polygon.push(point);
  }

  setLongAxis(cellId: string, a: Point, b: Point): void {
    if (a[0] === b[0] && a[1] === b[1]) {
      throw new EditError("long-axis endpoints must be distinct");
    }
    this.cell(cellId);
    this.snapshot();
    this.cell(cellId).long_axis = [a, b];
  }

  /** Start a neurite from a cell body. */
  addNeurite(cellId: string, start: Point): string {
    this.cell(cellId); // existence check before mutating
    this.snapshot();
    const id = `n${this.nextNeurite++}`;
    this.draft.neurites.push({
      id,
      cell_id: cellId,
      points: [start],
      termination: "self_terminated",
    });
    return id;
  }

  addNeuritePoint(traceId: string, point: Point): void {
    this.trace(traceId);
    this.snapshot();
    this.trace(traceId).points.push(point);
  }

  /** Start a branch; its anchor snaps to the closest point of the parent. */
  addBranch(parentId: string, near: Point): string {
    const parent = this.trace(parentId);
    if (parent.points.length < 2) {
      throw new EditError("trace the parent neurite before branching");
    }
    this.snapshot();
    const anchor = projectOntoPolyline(near, this.trace(parentId).points).point;
    const id = `n${this.nextNeurite++}`;
    const branch: NeuriteNode = { id, points: [anchor], termination: "self_terminated" };
    const target = this.trace(parentId);
    target.branches = [...(target.branches ?? []), branch];
    return id;
  }

  /** Mark how a trace ends; connecting requires the target cell. */
  setTermination(traceId: string, termination: Termination, connectedCellId?: string): void {
    this.trace(traceId);
    if (termination === "connected") {
      if (!connectedCellId) {
        throw new EditError("pick the connected cell before marking the neurite connected");
      }
      this.cell(connectedCellId);
    }
    this.snapshot();
    const node = this.trace(traceId);
    node.termination = termination;
    if (termination === "connected") {
      node.connected_cell_id = connectedCellId;
    } else {
      delete node.connected_cell_id;
    }
  }

  /** Live measurement preview for a traced body, in microns. */
  bodyPreview(cellId: string): { areaUm2: number; perimeterUm: number } | null {
    const cell = this.cell(cellId);
    if (cell.polygon.length < 3) {
      return null;
    }
    return {
      areaUm2: areaUm2(cell.polygon, this.draft.px_per_micron),
      perimeterUm: perimeterUm(cell.polygon, this.draft.px_per_micron),
    };
  }

  /** Schema problems that would block a save; empty means saveable. */
  validate(): SchemaError[] {
    return validateAnnotation(this.toJSON());
  }

  /** Wire-format document (cells with unset long axes surface as errors
   *  through validate(); serialization itself never throws). */
  toJSON(): AnnotationDoc {
    return JSON.parse(JSON.stringify({
      source: this.draft.source,
      px_per_micron: this.draft.px_per_micron,
      cells: this.draft.cells,
      neurites: this.draft.neurites,
    })) as AnnotationDoc;
  }

  /** Replace the draft with a previously saved document. */
  loadDocument(doc: AnnotationDoc): void {
    this.draft = JSON.parse(JSON.stringify(doc)) as Draft;
    this.undoStack = [];
    this.dirty = false;
    const ids = (prefix: string): number[] =>
      [...this.allTraceIds()].concat(this.draft.cells.map((c) => c.id))
        .filter((id) => id.startsWith(prefix))
        .map((id) => parseInt(id.slice(prefix.length), 10))
        .filter((n) => Number.isFinite(n));
    this.nextCell = Math.max(0, ...ids("c")) + 1;
    this.nextNeurite = Math.max(0, ...ids("n")) + 1;
  }

  private *allTraceIds(): Generator<string> {
    const stack = [...this.draft.neurites];
    while (stack.length > 0) {
      const node = stack.pop()!;
      yield node.id;
      stack.push(...(node.branches ?? []));
    }
  }

  markSaved(): void {
    this.dirty = false;
  }
}
