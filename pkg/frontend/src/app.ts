/**
 * DOM wiring. All state comes from polling the API; all logic lives in
 * viewmodel.ts. One session per tab, no router, no framework.
 */

import { ApiClient, ApiError } from './api.js';
import type { InstanceSnapshot, SchemaDoc, TaskEntry } from './api.js';
import {
  applyFormFields,
  buildApplyData,
  classifyCompletionError,
  pluginChoices,
  renderDecision,
  selectionsPayload,
  statusLine,
  taskOutputFields,
  validateApply,
} from './viewmodel.js';

const NOTIFY_VP = 'notification';
const POLL_MS = 2000;

const api = new ApiClient('');

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = '',
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function inputFor(type: string, name: string): HTMLInputElement | HTMLSelectElement {
  if (type === 'boolean') {
    const select = el('select', { name });
    select.append(el('option', { value: 'true' }, 'yes'), el('option', { value: 'false' }, 'no'));
    return select;
  }
  const kind = type === 'integer' || type === 'number' ? 'number' : 'text';
  return el('input', { type: kind, name });
}

let watched: string | null = null;

async function renderApply(schema: SchemaDoc): Promise<void> {
  const pane = byId('apply');
  pane.textContent = '';
  const fields = applyFormFields(schema);
  const form = el('form');

  let group = '';
  let fieldset: HTMLElement = form;
  for (const field of fields) {
    if (field.group !== group) {
      group = field.group;
      fieldset = el('fieldset');
      fieldset.append(el('legend', {}, group));
      form.append(fieldset);
    }
    const row = el('label', { class: 'row' }, `${field.label}${field.required ? '' : ' (optional)'}`);
    row.append(inputFor(field.type, field.path));
    const note = el('span', { class: 'error', 'data-error-for': field.path });
    row.append(note);
    fieldset.append(row);
  }

  const notifyBox = el('fieldset');
  notifyBox.append(el('legend', {}, 'Notify me by'));
  const plugins = await api.plugins(NOTIFY_VP);
  for (const choice of pluginChoices(plugins)) {
    const row = el('label', { class: 'row' });
    row.append(el('input', { type: 'checkbox', name: 'notify', value: choice.id }));
    row.append(document.createTextNode(choice.label));
    notifyBox.append(row);
  }
  form.append(notifyBox);

  const submit = el('button', { type: 'submit' }, 'Apply for a permit');
  form.append(submit, el('p', { id: 'apply-result', class: 'status' }));

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    void submitApply(form, fields);
  });
  pane.append(form);

  async function submitApply(root: HTMLFormElement, formFields: typeof fields): Promise<void> {
    const values: Record<string, string> = {};
    for (const field of formFields) {
      const input = root.elements.namedItem(field.path) as HTMLInputElement | HTMLSelectElement | null;
      values[field.path] = input ? input.value : '';
    }
    root.querySelectorAll('.error').forEach((node) => (node.textContent = ''));
    const check = validateApply(formFields, values);
    if (!check.ok) {
      for (const [path, message] of Object.entries(check.errors)) {
        const slot = root.querySelector(`[data-error-for="${path}"]`);
        if (slot) slot.textContent = message;
      }
      return; // nothing was sent
    }
    const chosen = Array.from(
      root.querySelectorAll<HTMLInputElement>('input[name="notify"]:checked'),
    ).map((box) => box.value);
    const result = byId('apply-result');
    try {
      const started = await api.startInstance(
        'parking-permit',
        buildApplyData(formFields, values),
        selectionsPayload(NOTIFY_VP, chosen),
      );
      watched = started.instance_id;
      result.textContent = `Application received: ${started.instance_id}`;
    } catch (error) {
      result.textContent = error instanceof ApiError ? error.detail : String(error);
    }
  }
}

function renderTask(task: TaskEntry, schema: SchemaDoc, notices: Map<string, string>): HTMLElement {
  const card = el('div', { class: 'card' });
  card.append(el('h3', {}, task.label || task.form_ref));
  card.append(el('p', { class: 'meta' }, `${task.task_id} on ${task.instance_id}`));
  const form = el('form');
  const fields = taskOutputFields(task, schema);
  for (const field of fields) {
    const row = el('label', { class: 'row' }, field.label);
    row.append(inputFor(field.type, field.path));
    form.append(row);
  }
  form.append(el('button', { type: 'submit' }, 'Complete'));
  const notice = notices.get(task.task_id);
  if (notice) form.append(el('p', { class: 'error' }, notice));
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    const outputs: Record<string, unknown> = {};
    for (const field of fields) {
      const input = form.elements.namedItem(field.path) as HTMLInputElement | HTMLSelectElement | null;
      if (!input) continue;
      outputs[field.path] =
        field.type === 'boolean'
          ? input.value === 'true'
          : field.type === 'integer' || field.type === 'number'
            ? Number(input.value)
            : input.value;
    }
    void api
      .completeTask(task.task_id, outputs)
      .then(() => notices.delete(task.task_id))
      .catch((error) => {
        if (error instanceof ApiError && classifyCompletionError(error) === 'stale') {
          notices.set(task.task_id, 'This task was already completed elsewhere.');
        } else if (error instanceof ApiError) {
          notices.set(task.task_id, error.detail);
        } else {
          throw error;
        }
      })
      .finally(() => void refresh(schema, notices));
  });
  card.append(form);
  return card;
}

async function refresh(schema: SchemaDoc, notices: Map<string, string>): Promise<void> {
  const tasks = await api.tasks('open');
  const list = byId('worklist');
  list.textContent = '';
  if (!tasks.length) list.append(el('p', { class: 'status' }, 'No open tasks.'));
  for (const task of tasks) list.append(renderTask(task, schema, notices));

  const incidents = await api.incidents('open');
  const ops = byId('incidents');
  ops.textContent = '';
  if (!incidents.length) ops.append(el('p', { class: 'status' }, 'No open incidents.'));
  for (const incident of incidents) {
    const card = el('div', { class: 'card' });
    card.append(el('h3', {}, incident.kind));
    card.append(
      el('p', { class: 'meta' }, `${incident.node_id} on ${incident.instance_id}, attempts ${incident.attempts}`),
    );
    card.append(el('p', {}, incident.error));
    const resume = el('button', {}, 'Resume');
    resume.addEventListener('click', () => {
      void api.resolveIncident(incident.incident_id, 'resume').then(() => refresh(schema, notices));
    });
    const cancel = el('button', {}, 'Cancel child');
    cancel.addEventListener('click', () => {
      void api.resolveIncident(incident.incident_id, 'cancel_child').then(() => refresh(schema, notices));
    });
    card.append(resume, document.createTextNode(' '), cancel);
    ops.append(card);
  }

  const status = byId('instance-status');
  if (watched) {
    let snapshot: InstanceSnapshot;
    try {
      snapshot = await api.instance(watched);
    } catch {
      return;
    }
    status.textContent = '';
    status.append(el('p', {}, statusLine(snapshot)));
    status.append(el('p', {}, `Decision: ${renderDecision(snapshot)}`));
  }
}

async function boot(): Promise<void> {
  const health = await api.health();
  byId('product-name').textContent = health.core_processes.join(', ') || health.product;
  const schema = await api.schema();
  const notices = new Map<string, string>();
  await renderApply(schema);
  await refresh(schema, notices);
  setInterval(() => void refresh(schema, notices), POLL_MS);
}

void boot().catch((error) => {
  byId('product-name').textContent = `Cannot reach the service: ${String(error)}`;
});
