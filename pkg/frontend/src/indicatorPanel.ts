import { ApiClient, ApiError } from './api';
import type {
  IndicatorResponse,
  IndicatorResult,
  OperationField,
  OperationInput,
} from './types';

export const OPERATION_FIELDS: OperationField[] = [
  'mass_category',
  'flight_mode',
  'ground_environment',
  'airspace_type',
  'altitude_category',
];

// Form choices only — every *displayed result* string comes from the service.
export const VOCABULARIES: Record<OperationField, string[]> = {
  mass_category: ['sub_250g', 'sub_25kg', 'over_25kg'],
  flight_mode: ['VLOS', 'BVLOS'],
  ground_environment: [
    'controlled_ground',
    'sparsely_populated',
    'populated',
    'assembly_of_people',
  ],
  airspace_type: ['uncontrolled', 'controlled'],
  altitude_category: ['below_120m_agl', 'above_120m_agl'],
};

export const ALL_INDICATORS = [
  'likely_regulatory_pathway',
  'initial_ground_risk_orientation',
  'initial_air_risk_orientation',
  'expected_assessment_depth',
];

export function renderResultCard(result: IndicatorResult, auditId: string): HTMLElement {
  const card = document.createElement('div');
  card.className = 'indicator-card';
  card.dataset.indicator = result.name;

  const title = document.createElement('h4');
  title.textContent = result.name;
  card.appendChild(title);

  const value = document.createElement('span');
  value.className = 'indicator-value';
  if (result.inconclusive) {
    const badge = document.createElement('span');
    badge.className = 'badge inconclusive';
    badge.textContent = result.tied_values.join(' / ');
    value.appendChild(badge);
  } else {
    value.textContent = result.value ?? '';
  }
  card.appendChild(value);

  const consistency = document.createElement('span');
  consistency.className = 'consistency';
  consistency.textContent = `${result.value_consistency}`;
  card.appendChild(consistency);

  const explanation = document.createElement('p');
  explanation.className = 'explanation';
  explanation.textContent = result.explanation;
  card.appendChild(explanation);

  const sources = document.createElement('ul');
  sources.className = 'card-sources';
  for (const source of result.sources) {
    const row = document.createElement('li');
    const link = document.createElement('a');
    link.href = `#/chunks/${source.chunk_id}`;
    link.textContent = `[${source.chunk_index}] ${source.section_title}, page ${source.page}`;
    row.appendChild(link);
    sources.appendChild(row);
  }
  card.appendChild(sources);

  const audit = document.createElement('a');
  audit.className = 'audit-link';
  audit.href = `#/audit/${auditId}`;
  audit.textContent = auditId;
  card.appendChild(audit);
  return card;
}

export function renderResultsGrid(response: IndicatorResponse): HTMLElement {
  const grid = document.createElement('div');
  grid.className = 'results-grid';
  for (const [name, result] of Object.entries(response.indicators)) {
    grid.appendChild(renderResultCard(result, response.audit_ids[name]));
  }
  if (response.warnings.length > 0) {
    const warnings = document.createElement('ul');
    warnings.className = 'coherence-warnings';
    for (const warning of response.warnings) {
      const row = document.createElement('li');
      row.textContent = warning;
      warnings.appendChild(row);
    }
    grid.appendChild(warnings);
  }
  return grid;
}

/** Indicator what-if panel: five dropdowns bound to the controlled
 * vocabularies; submit stays disabled until every field is chosen. */
export class IndicatorPanel {
  readonly form: HTMLFormElement;
  readonly submitButton: HTMLButtonElement;
  readonly results: HTMLElement;
  private readonly selects = new Map<OperationField, HTMLSelectElement>();

  constructor(
    private readonly client: ApiClient,
    container: HTMLElement,
    private readonly indicators: string[] = ALL_INDICATORS,
  ) {
    this.form = document.createElement('form');
    for (const field of OPERATION_FIELDS) {
      const select = document.createElement('select');
      select.name = field;
      const placeholder = document.createElement('option');
      placeholder.value = '';
      placeholder.textContent = `select ${field}`;
      select.appendChild(placeholder);
      for (const choice of VOCABULARIES[field]) {
        const option = document.createElement('option');
        option.value = choice;
        option.textContent = choice;
        select.appendChild(option);
      }
      select.addEventListener('change', () => this.refreshSubmitState());
      this.selects.set(field, select);
      this.form.appendChild(select);
    }
    this.submitButton = document.createElement('button');
    this.submitButton.type = 'submit';
    this.submitButton.disabled = true;
    this.submitButton.textContent = 'Run indicators';
    this.form.appendChild(this.submitButton);
    this.results = document.createElement('div');
    container.replaceChildren(this.form, this.results);
    this.form.addEventListener('submit', (event) => {
      event.preventDefault();
      void this.submit();
    });
  }

  select(field: OperationField, value: string): void {
    const element = this.selects.get(field)!;
    element.value = value;
    element.dispatchEvent(new Event('change'));
  }

  operation(): OperationInput {
    const op = {} as OperationInput;
    for (const [field, select] of this.selects) {
      op[field] = select.value;
    }
    return op;
  }

  refreshSubmitState(): void {
    const complete = [...this.selects.values()].every((select) => select.value !== '');
    this.submitButton.disabled = !complete;
  }

  async submit(): Promise<void> {
    this.clearFieldErrors();
    let response: IndicatorResponse;
    try {
      response = await this.client.indicators({
        op: this.operation(),
        indicators: this.indicators,
      });
    } catch (error) {
      if (error instanceof ApiError && typeof error.detail === 'object') {
        this.markFieldError(error.detail.field as OperationField, error.detail.error);
      } else {
        this.results.replaceChildren(renderErrorText(error));
      }
      return;
    }
    this.results.replaceChildren(renderResultsGrid(response));
  }

  private markFieldError(field: OperationField, message: string): void {
    const select = this.selects.get(field);
    if (!select) return;
    select.classList.add('field-error');
    const note = document.createElement('span');
    note.className = 'field-error-message';
    note.textContent = message;
    select.insertAdjacentElement('afterend', note);
  }

  private clearFieldErrors(): void {
    for (const select of this.selects.values()) {
      select.classList.remove('field-error');
    }
    this.form.querySelectorAll('.field-error-message').forEach((node) => node.remove());
  }
}

function renderErrorText(error: unknown): HTMLElement {
  const banner = document.createElement('div');
  banner.className = 'error-banner';
  banner.textContent = error instanceof Error ? error.message : String(error);
  return banner;
}
