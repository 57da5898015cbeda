/**
 * Typed client for the /v1 HTTP API. Every call in the UI goes through
 * here; nothing else in the client talks to the network.
 */

export interface FieldDecl {
  name: string;
  type: string;
  required: boolean;
}

export interface RecordDecl {
  name: string;
  fields: FieldDecl[];
}

export interface SchemaDoc {
  records: RecordDecl[];
}

export interface HealthDoc {
  status: string;
  product: string;
  configuration: string[];
  core_processes: string[];
}

export interface PluginEntry {
  plugin_id: string;
  variation_point: string;
  implementation_process: string;
  label: string;
}

export interface TaskEntry {
  task_id: string;
  instance_id: string;
  node_id: string;
  form_ref: string;
  outputs: string[];
  label: string;
  state: string;
}

export interface IncidentEntry {
  incident_id: string;
  instance_id: string;
  node_id: string;
  kind: string;
  error: string;
  attempts: number;
  state: string;
}

export interface InstanceSnapshot {
  instance_id: string;
  definition_id: string;
  parent_id: string | null;
  state: string;
  variables: Record<string, unknown>;
  version: number;
  selections: Record<string, string[]>;
  open_tasks: string[];
  open_incidents: string[];
}

export interface StartResult {
  instance_id: string;
  state: string;
}

export interface CompleteResult {
  task_id: string;
  instance_id: string;
  state: string;
  root_instance_id: string;
  root_state: string;
}

export interface OutboxMessage {
  channel: string;
  recipient: string;
  body: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(`${base}${path}`, init);
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = (await res.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body, keep the status text
    }
    throw new ApiError(res.status, detail);
  }
  return (await res.json()) as T;
}

function post<T>(base: string, path: string, payload: unknown): Promise<T> {
  return request<T>(base, path, {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify(payload),
  });
}

export class ApiClient {
  constructor(private readonly base: string = '') {}

  health(): Promise<HealthDoc> {
    return request(this.base, '/v1/health');
  }

  schema(): Promise<SchemaDoc> {
    return request(this.base, '/v1/schema');
  }

  plugins(variationPoint: string): Promise<PluginEntry[]> {
    return request(this.base, `/v1/variation-points/${encodeURIComponent(variationPoint)}/plugins`);
  }

  startInstance(
    definitionId: string,
    data: Record<string, unknown>,
    selections?: Record<string, string[]>,
  ): Promise<StartResult> {
    const payload: Record<string, unknown> = { definition_id: definitionId, data };
    if (selections) payload.selections = selections;
    return post(this.base, '/v1/instances', payload);
  }

  instance(instanceId: string): Promise<InstanceSnapshot> {
    return request(this.base, `/v1/instances/${encodeURIComponent(instanceId)}`);
  }

  tasks(state = 'open'): Promise<TaskEntry[]> {
    return request(this.base, `/v1/tasks?state=${encodeURIComponent(state)}`);
  }

  completeTask(taskId: string, outputs: Record<string, unknown>): Promise<CompleteResult> {
    return post(this.base, `/v1/tasks/${encodeURIComponent(taskId)}/complete`, { outputs });
  }

  incidents(state = 'open'): Promise<IncidentEntry[]> {
    return request(this.base, `/v1/incidents?state=${encodeURIComponent(state)}`);
  }

  resolveIncident(incidentId: string, action: 'resume' | 'cancel_child'): Promise<{ state: string }> {
    return post(this.base, `/v1/incidents/${encodeURIComponent(incidentId)}/resolve`, { action });
  }

  outbox(): Promise<OutboxMessage[]> {
    return request(this.base, '/v1/outbox');
  }
}
