import { ApiClient } from './api';
import { IndicatorPanel } from './indicatorPanel';
import { QueryView } from './queryView';

/** Wire the explorer into a host page. Returns the controllers so embedding
 * pages (and tests) can drive them directly. */
export function mountExplorer(
  root: HTMLElement,
  baseUrl = '',
): { queryView: QueryView; indicatorPanel: IndicatorPanel } {
  const client = new ApiClient(baseUrl);

  const queryContainer = document.createElement('section');
  queryContainer.id = 'query-view';
  const form = document.createElement('form');
  const input = document.createElement('input');
  input.type = 'text';
  input.name = 'question';
  const button = document.createElement('button');
  button.type = 'submit';
  button.textContent = 'Ask';
  form.append(input, button);
  const output = document.createElement('div');
  output.className = 'query-output';
  queryContainer.append(form, output);

  const queryView = new QueryView(client, output);
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    if (input.value.trim()) void queryView.submit(input.value.trim());
  });

  const indicatorContainer = document.createElement('section');
  indicatorContainer.id = 'indicator-panel';
  const indicatorPanel = new IndicatorPanel(client, indicatorContainer);

  root.replaceChildren(queryContainer, indicatorContainer);
  return { queryView, indicatorPanel };
}
