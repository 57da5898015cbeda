import { describe, expect, it } from 'vitest';

import { ApiError } from '../src/api.js';
import type { InstanceSnapshot, PluginEntry, SchemaDoc, TaskEntry } from '../src/api.js';
import {
  applyFormFields,
  buildApplyData,
  classifyCompletionError,
  decisionValue,
  pathType,
  pluginChoices,
  renderDecision,
  selectionsPayload,
  statusLine,
  taskOutputFields,
  validateApply,
} from '../src/viewmodel.js';

const SIMPLE_SCHEMA: SchemaDoc = {
  records: [
    {
      name: 'application',
      fields: [
        { name: 'applicant', type: 'applicant', required: true },
        { name: 'company', type: 'company', required: true },
      ],
    },
    {
      name: 'applicant',
      fields: [
        { name: 'name', type: 'string', required: true },
        { name: 'contact', type: 'string', required: false },
      ],
    },
    {
      name: 'company',
      fields: [
        { name: 'name', type: 'string', required: true },
        { name: 'address', type: 'string', required: true },
      ],
    },
    { name: 'decision', fields: [{ name: 'justified', type: 'boolean', required: true }] },
  ],
};

const RICH_SCHEMA: SchemaDoc = {
  records: [
    {
      name: 'application',
      fields: [
        { name: 'applicant', type: 'applicant', required: true },
        { name: 'company', type: 'company', required: true },
        { name: 'carInformation', type: 'carInformation', required: false },
      ],
    },
    { name: 'applicant', fields: [{ name: 'name', type: 'string', required: true }] },
    {
      name: 'company',
      fields: [
        { name: 'name', type: 'string', required: true },
        { name: 'address', type: 'string', required: true },
        { name: 'commercialRegisterNo', type: 'string', required: false },
      ],
    },
    { name: 'carInformation', fields: [{ name: 'numberPlate', type: 'string', required: true }] },
  ],
};

describe('applyFormFields', () => {
  it('derives exactly the scalar paths reachable from application', () => {
    const paths = applyFormFields(SIMPLE_SCHEMA).map((f) => f.path);
    expect(paths).toEqual([
      'application.applicant.name',
      'application.applicant.contact',
      'application.company.name',
      'application.company.address',
    ]);
  });

  it('renders no number-plate input when the schema lacks carInformation', () => {
    const paths = applyFormFields(SIMPLE_SCHEMA).map((f) => f.path);
    expect(paths.some((p) => p.includes('carInformation'))).toBe(false);
    expect(paths.some((p) => p.includes('commercialRegisterNo'))).toBe(false);
  });

  it('adds dynamic fields once the deployed schema contains them', () => {
    const paths = applyFormFields(RICH_SCHEMA).map((f) => f.path);
    expect(paths).toContain('application.carInformation.numberPlate');
    expect(paths).toContain('application.company.commercialRegisterNo');
  });

  it('does not pull unrelated roots like decision into the form', () => {
    const groups = new Set(applyFormFields(SIMPLE_SCHEMA).map((f) => f.group));
    expect(groups.has('decision')).toBe(false);
  });
});

describe('validateApply', () => {
  const fields = applyFormFields(SIMPLE_SCHEMA);

  it('flags a missing applicant name inline', () => {
    const result = validateApply(fields, {
      'application.company.name': 'Muster GmbH',
      'application.company.address': 'Handwerkerhof 7',
    });
    expect(result.ok).toBe(false);
    expect(result.errors['application.applicant.name']).toMatch(/required/);
  });

  it('accepts a filled form with optional fields left empty', () => {
    const result = validateApply(fields, {
      'application.applicant.name': 'Ada Muster',
      'application.company.name': 'Muster GmbH',
      'application.company.address': 'Handwerkerhof 7',
    });
    expect(result.ok).toBe(true);
    expect(result.errors).toEqual({});
  });
});

describe('buildApplyData', () => {
  it('nests dotted paths and drops empty optionals', () => {
    const fields = applyFormFields(SIMPLE_SCHEMA);
    const data = buildApplyData(fields, {
      'application.applicant.name': 'Ada Muster',
      'application.applicant.contact': '',
      'application.company.name': 'Muster GmbH',
      'application.company.address': 'Handwerkerhof 7',
    });
    expect(data).toEqual({
      application: {
        applicant: { name: 'Ada Muster' },
        company: { name: 'Muster GmbH', address: 'Handwerkerhof 7' },
      },
    });
  });

  it('converts integer, number, and boolean inputs', () => {
    const fields = [
      { path: 'a.count', label: 'Count', type: 'integer', required: true, group: 'a' },
      { path: 'a.rate', label: 'Rate', type: 'number', required: true, group: 'a' },
      { path: 'a.flag', label: 'Flag', type: 'boolean', required: true, group: 'a' },
    ];
    expect(buildApplyData(fields, { 'a.count': '4', 'a.rate': '0.5', 'a.flag': 'true' })).toEqual({
      a: { count: 4, rate: 0.5, flag: true },
    });
  });
});

describe('pluginChoices', () => {
  it('offers exactly what the listing returned, nothing hard-coded', () => {
    const listing: PluginEntry[] = [
      { plugin_id: 'notification.clerk', variation_point: 'notification', implementation_process: 'p1', label: 'Clerk call' },
      { plugin_id: 'notification.sms', variation_point: 'notification', implementation_process: 'p2', label: 'SMS' },
    ];
    const choices = pluginChoices(listing);
    expect(choices.map((c) => c.id)).toEqual(['notification.clerk', 'notification.sms']);
    expect(choices.some((c) => c.id === 'notification.mail')).toBe(false);
  });

  it('falls back to the plugin id when no label is set', () => {
    const listing: PluginEntry[] = [
      { plugin_id: 'notification.sms', variation_point: 'notification', implementation_process: 'p', label: '' },
    ];
    expect(pluginChoices(listing)[0]?.label).toBe('notification.sms');
  });
});

describe('selectionsPayload', () => {
  it('builds a sorted selection map and omits empty picks', () => {
    expect(selectionsPayload('notification', ['notification.sms', 'notification.clerk'])).toEqual({
      notification: ['notification.clerk', 'notification.sms'],
    });
    expect(selectionsPayload('notification', [])).toBeUndefined();
  });
});

describe('task output fields', () => {
  const task: TaskEntry = {
    task_id: 't-1', instance_id: 'i-2', node_id: 'check', form_ref: 'manual-check',
    outputs: ['decision.justified'], label: 'Check the application', state: 'open',
  };

  it('resolves output paths to their schema types', () => {
    expect(pathType(SIMPLE_SCHEMA, 'decision.justified')).toBe('boolean');
    expect(pathType(SIMPLE_SCHEMA, 'application.company.name')).toBe('string');
    expect(pathType(SIMPLE_SCHEMA, 'decision.missing')).toBeUndefined();
    const fields = taskOutputFields(task, SIMPLE_SCHEMA);
    expect(fields).toHaveLength(1);
    expect(fields[0]?.type).toBe('boolean');
    expect(fields[0]?.path).toBe('decision.justified');
  });
});

describe('decision display', () => {
  const snapshot = {
    instance_id: 'i-1', definition_id: 'parking-permit', parent_id: null,
    state: 'completed', variables: { decision: { justified: false } },
    version: 2, selections: {}, open_tasks: [], open_incidents: [],
  } as InstanceSnapshot;

  it('shows the engine value verbatim', () => {
    expect(decisionValue(snapshot)).toEqual({ justified: false });
    expect(JSON.parse(renderDecision(snapshot))).toEqual(snapshot.variables['decision']);
  });

  it('says so when there is no decision yet', () => {
    const fresh = { ...snapshot, variables: {} } as InstanceSnapshot;
    expect(renderDecision(fresh)).toBe('(no decision yet)');
  });

  it('formats the status line from the snapshot', () => {
    expect(statusLine(snapshot)).toBe('i-1: completed');
  });
});

describe('classifyCompletionError', () => {
  it('maps conflicts and vanished tasks to a stale notice', () => {
    expect(classifyCompletionError(new ApiError(409, 'already completed'))).toBe('stale');
    expect(classifyCompletionError(new ApiError(404, 'no such task'))).toBe('stale');
  });

  it('maps validation failures to inline display', () => {
    expect(classifyCompletionError(new ApiError(422, 'bad outputs'))).toBe('invalid');
  });

  it('leaves everything else to the caller', () => {
    expect(classifyCompletionError(new ApiError(500, 'boom'))).toBeUndefined();
  });
});
