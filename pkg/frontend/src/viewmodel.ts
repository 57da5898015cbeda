/**
 * Pure view logic. Everything here is a function of API payloads, so the
 * whole layer is testable without a browser. The rules that matter:
 * the apply form is derived from the deployed schema (fields the product
 * did not compose are never rendered), notification choices come from the
 * live plugin listing, and decision values pass through untouched.
 */

import type {
  ApiError,
  InstanceSnapshot,
  PluginEntry,
  SchemaDoc,
  TaskEntry,
} from './api.js';

export interface FormField {
  path: string; // dotted document path, e.g. application.applicant.name
  label: string;
  type: string; // scalar type name
  required: boolean;
  group: string; // record the field belongs to, for fieldset grouping
}

const SCALARS = new Set(['string', 'integer', 'number', 'boolean']);

function humanize(name: string): string {
  const spaced = name.replace(/([a-z0-9])([A-Z])/g, '$1 $2').replace(/[._-]/g, ' ');
  return spaced.charAt(0).toUpperCase() + spaced.slice(1).toLowerCase();
}

/**
 * Flatten the application subtree of the deployed schema into form fields.
 * Records the product did not compose simply are not in the schema, so
 * their inputs never appear; nothing here knows any feature by name.
 */
export function applyFormFields(schema: SchemaDoc, root = 'application'): FormField[] {
  const byName = new Map(schema.records.map((r) => [r.name, r]));
  const fields: FormField[] = [];
  const walk = (recordName: string, prefix: string, seen: string[]) => {
    const record = byName.get(recordName);
    if (!record || seen.includes(recordName)) return;
    for (const field of record.fields) {
      const path = `${prefix}.${field.name}`;
      if (SCALARS.has(field.type)) {
        fields.push({
          path,
          label: humanize(field.name),
          type: field.type,
          required: field.required,
          group: recordName,
        });
      } else {
        walk(field.type, path, [...seen, recordName]);
      }
    }
  };
  walk(root, root, []);
  return fields;
}

export interface ValidationResult {
  ok: boolean;
  errors: Record<string, string>; // path -> inline message
}

/** Client-side gate: required fields must be filled before a request goes out. */
export function validateApply(fields: FormField[], values: Record<string, string>): ValidationResult {
  const errors: Record<string, string> = {};
  for (const field of fields) {
    const raw = (values[field.path] ?? '').trim();
    if (field.required && raw === '') {
      errors[field.path] = `${field.label} is required`;
    }
  }
  return { ok: Object.keys(errors).length === 0, errors };
}

function convert(type: string, raw: string): unknown {
  if (type === 'integer') return parseInt(raw, 10);
  if (type === 'number') return Number(raw);
  if (type === 'boolean') return raw === 'true' || raw === 'on';
  return raw;
}

/** Nest the flat input values back into the document tree the API expects. */
export function buildApplyData(
  fields: FormField[],
  values: Record<string, string>,
): Record<string, unknown> {
  const data: Record<string, unknown> = {};
  for (const field of fields) {
    const raw = (values[field.path] ?? '').trim();
    if (raw === '') continue; // optional and empty: leave the field out
    const parts = field.path.split('.');
    let node = data;
    for (const part of parts.slice(0, -1)) {
      const next = node[part];
      if (typeof next === 'object' && next !== null) {
        node = next as Record<string, unknown>;
      } else {
        const created: Record<string, unknown> = {};
        node[part] = created;
        node = created;
      }
    }
    node[parts[parts.length - 1] as string] = convert(field.type, raw);
  }
  return data;
}

export interface PluginChoice {
  id: string;
  label: string;
}

/**
 * Checkbox list for one variation point. The listing is the only source:
 * whatever the server excluded at startup is simply not offered.
 */
export function pluginChoices(plugins: PluginEntry[]): PluginChoice[] {
  return plugins.map((p) => ({ id: p.plugin_id, label: p.label || p.plugin_id }));
}

export function selectionsPayload(
  variationPoint: string,
  chosen: string[],
): Record<string, string[]> | undefined {
  return chosen.length ? { [variationPoint]: [...chosen].sort() } : undefined;
}

/** Scalar type at a dotted path, or undefined when the schema lacks it. */
export function pathType(schema: SchemaDoc, path: string): string | undefined {
  const byName = new Map(schema.records.map((r) => [r.name, r]));
  const parts = path.split('.');
  let record = byName.get(parts[0] as string);
  for (let i = 1; i < parts.length; i += 1) {
    if (!record) return undefined;
    const field = record.fields.find((f) => f.name === parts[i]);
    if (!field) return undefined;
    if (SCALARS.has(field.type)) {
      return i === parts.length - 1 ? field.type : undefined;
    }
    record = byName.get(field.type);
  }
  return undefined;
}

/** Input descriptors for a task's declared outputs. */
export function taskOutputFields(task: TaskEntry, schema: SchemaDoc): FormField[] {
  return task.outputs.map((path) => ({
    path,
    label: humanize(path),
    type: pathType(schema, path) ?? 'string',
    required: true,
    group: task.form_ref,
  }));
}

/**
 * The decision subtree exactly as the engine reports it. The UI displays
 * this value; it never recomputes or rephrases it.
 */
export function decisionValue(instance: InstanceSnapshot): unknown {
  return instance.variables['decision'];
}

export function renderDecision(instance: InstanceSnapshot): string {
  const value = decisionValue(instance);
  return value === undefined ? '(no decision yet)' : JSON.stringify(value);
}

export function statusLine(instance: InstanceSnapshot): string {
  return `${instance.instance_id}: ${instance.state}`;
}

export type CompletionProblem = 'stale' | 'invalid';

/**
 * A conflict means someone else finished the task first; the worklist shows
 * a stale-task notice and refreshes. Validation failures render inline.
 */
export function classifyCompletionError(error: ApiError): CompletionProblem | undefined {
  if (error.status === 409 || error.status === 404) return 'stale';
  if (error.status === 422) return 'invalid';
  return undefined;
}
