// Annotation document types and client-side validation.  The shapes and
// the JSON-path error format mirror the service's validator so an invalid
// draft is caught before it ever leaves the browser.

import type { Point } from "./geometry.js";
import { projectOntoSegment } from "./geometry.js";

export type CellLabel = "neuron" | "dead_cell";
export type Termination = "self_terminated" | "connected";

export interface CellTrace {
  id: string;
  label: CellLabel;
  polygon: Point[];
  long_axis: [Point, Point];
  center: Point;
}

export interface NeuriteNode {
  id: string;
  points: Point[];
  termination: Termination;
  cell_id?: string; // top-level neurites only
  connected_cell_id?: string;
  branches?: NeuriteNode[];
}

export interface AnnotationDoc {
  source: string;
  px_per_micron: number;
  cells: CellTrace[];
  neurites: NeuriteNode[];
}

export interface SchemaError {
  path: string;
  message: string;
}

const BRANCH_ANCHOR_TOL = 1e-3;

function onPolyline(p: Point, polyline: Point[], tol: number): boolean {
  for (let i = 0; i < polyline.length - 1; i++) {
    if (projectOntoSegment(p, polyline[i], polyline[i + 1]).distance <= tol) {
      return true;
    }
  }
  return false;
}

function checkTrace(
  node: NeuriteNode,
  path: string,
  cellIds: Set<string>,
  seenIds: Set<string>,
  errors: SchemaError[],
): void {
  if (seenIds.has(node.id)) {
    errors.push({ path: `${path}.id`, message: `duplicate trace id '${node.id}'` });
  }
  seenIds.add(node.id);
  if (node.points.length < 2) {
    errors.push({
      path: `${path}.points`,
      message: `too short (at least 2 items required)`,
    });
  }
  if (node.termination === "connected") {
    if (!node.connected_cell_id) {
      errors.push({
        path: `${path}.connected_cell_id`,
        message: "required when termination is 'connected'",
      });
    } else if (!cellIds.has(node.connected_cell_id)) {
      errors.push({
        path: `${path}.connected_cell_id`,
        message: `unknown cell id '${node.connected_cell_id}'`,
      });
    }
  }
  (node.branches ?? []).forEach((branch, b) => {
    const branchPath = `${path}.branches[${b}]`;
    if (
      branch.points.length > 0 &&
      node.points.length >= 2 &&
      !onPolyline(branch.points[0], node.points, BRANCH_ANCHOR_TOL)
    ) {
      errors.push({
        path: `${branchPath}.points[0]`,
        message: "branch must start on its parent polyline",
      });
    }
    checkTrace(branch, branchPath, cellIds, seenIds, errors);
  });
}

export function validateAnnotation(doc: AnnotationDoc): SchemaError[] {
  const errors: SchemaError[] = [];
  if (!(doc.px_per_micron > 0)) {
    errors.push({ path: "px_per_micron", message: "must be > 0" });
  }
  const cellIds = new Set<string>();
  doc.cells.forEach((cell, i) => {
    if (cellIds.has(cell.id)) {
      errors.push({ path: `cells[${i}].id`, message: `duplicate cell id '${cell.id}'` });
    }
    cellIds.add(cell.id);
    if (cell.polygon.length < 3) {
      errors.push({
        path: `cells[${i}].polygon`,
        message: "too short (at least 3 items required)",
      });
    }
    if (!cell.long_axis) {
      errors.push({ path: `cells[${i}].long_axis`, message: "long axis not set" });
    } else {
      const [[x1, y1], [x2, y2]] = cell.long_axis;
      if (x1 === x2 && y1 === y2) {
        errors.push({
          path: `cells[${i}].long_axis`,
          message: "long-axis endpoints must be distinct",
        });
      }
    }
  });
  const seenTraceIds = new Set<string>();
  doc.neurites.forEach((neurite, i) => {
    const path = `neurites[${i}]`;
    if (!neurite.cell_id || !cellIds.has(neurite.cell_id)) {
      errors.push({ path: `${path}.cell_id`, message: `unknown cell id '${neurite.cell_id}'` });
    }
    checkTrace(neurite, path, cellIds, seenTraceIds, errors);
  });
  return errors;
}
