import { ApiClient, ApiError } from './api';
import type { QueryResponse } from './types';

export const REFUSAL_ANSWER = 'I cannot provide an answer for this question';

const GAP_PHRASES = [
  REFUSAL_ANSWER.toLowerCase(),
  'not enough information',
  'insufficient',
  'information is missing',
];

const HEADING_RE = /^(#{1,4}\s+.+|[A-Z][\w\s/-]{0,60}:)$/;

export function isEvidenceGap(answer: string): boolean {
  const lowered = answer.toLowerCase();
  return GAP_PHRASES.some((phrase) => lowered.includes(phrase));
}

/** Split an answer into labeled sections on heading-looking lines.
 * Purely presentational; the text is never altered, only grouped. */
export function splitSections(answer: string): { heading: string | null; body: string }[] {
  const sections: { heading: string | null; body: string }[] = [];
  let current: { heading: string | null; lines: string[] } = { heading: null, lines: [] };
  for (const line of answer.split('\n')) {
    if (HEADING_RE.test(line.trim())) {
      if (current.heading !== null || current.lines.some((l) => l.trim())) {
        sections.push({ heading: current.heading, body: current.lines.join('\n') });
      }
      current = { heading: line.trim(), lines: [] };
    } else {
      current.lines.push(line);
    }
  }
  sections.push({ heading: current.heading, body: current.lines.join('\n') });
  return sections;
}

export function renderAnswer(response: QueryResponse): HTMLElement {
  const panel = document.createElement('div');
  panel.className = isEvidenceGap(response.answer)
    ? 'answer-panel evidence-gap'
    : 'answer-panel';
  for (const section of splitSections(response.answer)) {
    const block = document.createElement('section');
    if (section.heading) {
      const heading = document.createElement('h3');
      heading.textContent = section.heading;
      block.appendChild(heading);
    }
    const body = document.createElement('p');
    body.textContent = section.body;
    block.appendChild(body);
    panel.appendChild(block);
  }
  return panel;
}

export function renderSources(response: QueryResponse): HTMLElement {
  const panel = document.createElement('div');
  panel.className = 'sources-panel';
  const heading = document.createElement('h3');
  heading.textContent = 'Sources';
  panel.appendChild(heading);
  const list = document.createElement('ul');
  const cited = new Set(response.citations);
  for (const source of response.sources) {
    const row = document.createElement('li');
    row.className = cited.has(source.chunk_index) ? 'source-row cited' : 'source-row';
    const link = document.createElement('a');
    link.href = `#/chunks/${source.chunk_id}`;
    link.dataset.chunkId = source.chunk_id;
    link.textContent = `[${source.chunk_index}] ${source.section_title}, page ${source.page} (${source.source_file})`;
    row.appendChild(link);
    list.appendChild(row);
  }
  panel.appendChild(list);
  const audit = document.createElement('a');
  audit.className = 'audit-link';
  audit.href = `#/audit/${response.audit_id}`;
  audit.textContent = response.audit_id;
  panel.appendChild(audit);
  return panel;
}

export function renderErrorBanner(error: unknown): HTMLElement {
  const banner = document.createElement('div');
  banner.className = 'error-banner';
  const message = document.createElement('span');
  message.textContent = error instanceof ApiError ? error.message : String(error);
  banner.appendChild(message);
  const retry = document.createElement('button');
  retry.className = 'retry';
  retry.textContent = 'Retry';
  banner.appendChild(retry);
  return banner;
}

/** Query view controller: one in-flight query per tab; stale responses are
 * discarded by sequence number. */
export class QueryView {
  private sequence = 0;

  constructor(
    private readonly client: ApiClient,
    private readonly container: HTMLElement,
  ) {}

  async submit(question: string): Promise<void> {
    const ticket = ++this.sequence;
    let response: QueryResponse;
    try {
      response = await this.client.query({ question });
    } catch (error) {
      if (ticket !== this.sequence) return;
      this.container.replaceChildren(renderErrorBanner(error));
      const retry = this.container.querySelector<HTMLButtonElement>('button.retry');
      retry?.addEventListener('click', () => void this.submit(question));
      return;
    }
    if (ticket !== this.sequence) return; // a newer query superseded this one
    this.container.replaceChildren(renderAnswer(response), renderSources(response));
  }
}
