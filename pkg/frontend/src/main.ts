import { ApiError, ExplorerApi } from './api.js';
import type { BoundResponse, CtBoundResponse } from './api.js';
import {
  buildChartModel,
  fetchCurves,
  hoverAt,
  methodQuery,
  renderCurvesSVG,
  type ChartModel,
} from './curves.js';
import { bannerText, formatFraction, formatIds } from './format.js';
import { ExplorerSession, openSession, parseWInput, type HistoryEntry } from './session.js';

const API_BASE = (window as { EXPLORER_API_BASE?: string }).EXPLORER_API_BASE ?? 'http://127.0.0.1:8000';
const api = new ExplorerApi(API_BASE);

let session: ExplorerSession | null = null;
let chartModel: ChartModel | null = null;
let dragStartRank: number | null = null;

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

function showError(message: string, clearData: boolean): void {
  const banner = $('error-banner');
  banner.textContent = message;
  banner.style.display = 'block';
  if (clearData) {
    // service unreachable: never show stale numbers
    $('chart').innerHTML = '';
    $('bound-panel').innerHTML = '';
    chartModel = null;
  }
}

function clearError(): void {
  $('error-banner').style.display = 'none';
}

function handleFailure(err: unknown): void {
  if (err instanceof ApiError) {
    showError(err.message, err.unreachable);
  } else {
    showError(err instanceof Error ? err.message : String(err), false);
  }
}

function selectedMethods(): string[] {
  return Array.from(document.querySelectorAll<HTMLInputElement>('#methods input:checked')).map(
    (el) => el.value,
  );
}

function renderWorkingSet(): void {
  if (!session) return;
  const box = $('chips');
  box.innerHTML = '';
  const active = new Set(session.workingSet.map(String));
  for (const id of session.ids) {
    const chip = document.createElement('button');
    chip.className = active.has(String(id)) ? 'chip on' : 'chip';
    chip.textContent = String(id);
    chip.onclick = () => {
      session?.toggleId(id);
      renderWorkingSet();
    };
    box.appendChild(chip);
  }
  $('set-size').textContent = `${session.workingSet.length} selected`;
}

function renderHistory(): void {
  if (!session) return;
  const list = $('history');
  list.innerHTML = '';
  for (const entry of session.history) {
    const row = document.createElement('li');
    const r = entry.response;
    const fdp = r.report.fdp_upper;
    const ids = (entry.request as { set: Array<string | number> }).set;
    const label = entry.kind === 'bound' ? (r as BoundResponse).method : 'kct';
    row.textContent = `#${entry.index} ${label} |R|=${ids.length} → ${formatFraction(fdp)} `;
    const btn = document.createElement('button');
    btn.textContent = 're-run';
    btn.onclick = () => {
      session
        ?.rerun(entry.index)
        .then((fresh) => {
          renderBoundPanel(fresh);
          renderHistory();
          clearError();
        })
        .catch(handleFailure);
    };
    row.appendChild(btn);
    list.appendChild(row);
  }
}

function renderBoundPanel(entry: HistoryEntry): void {
  const panel = $('bound-panel');
  const r = entry.response;
  const size = (entry.request as { set: unknown[] }).set.length;
  const fdp = r.report.fdp_upper;
  const witness =
    entry.kind === 'bound'
      ? `witness component ${(r as BoundResponse).report.witness ?? '—'}`
      : `witness t=${(r as CtBoundResponse).report.witness_t ?? '—'}`;
  panel.innerHTML = `
    <div class="banner">${bannerText(fdp.float, size)}</div>
    <div>FDP ≤ ${formatFraction(fdp)} (service: ≥ ${r.report.true_discoveries_lower} true)</div>
    <div>${witness}</div>
    <div class="ids">set: ${formatIds((r.set.ids as Array<string | number>) ?? [])}</div>
  `;
}

async function refreshCurves(): Promise<void> {
  if (!session) return;
  const alpha = Number(($('alpha') as HTMLInputElement).value) || 0.05;
  const labels = selectedMethods();
  const specs = labels.map((label) =>
    methodQuery(label, alpha, { planName: label.startsWith('kji') ? planNameFor(label) : undefined }),
  );
  try {
    const curves = await fetchCurves(api, session.id, specs);
    chartModel = buildChartModel(curves);
    $('chart').innerHTML = renderCurvesSVG(chartModel);
    wireChartEvents();
    clearError();
  } catch (err) {
    handleFailure(err);
  }
}

function planNameFor(label: string): string | undefined {
  return session?.planNames.find((name) => name.endsWith(label.slice(-1).toUpperCase()));
}

function wireChartEvents(): void {
  const host = $('chart');
  const svg = host.querySelector('svg');
  if (!svg || !chartModel) return;
  const rankFromEvent = (ev: MouseEvent): number => {
    const rect = svg.getBoundingClientRect();
    const x = ((ev.clientX - rect.left) / rect.width) * chartModel!.width;
    return chartModel!.rankAt(x);
  };
  svg.addEventListener('mousemove', (ev) => {
    const info = hoverAt(chartModel!, rankFromEvent(ev));
    const tip = $('tooltip');
    if (!info) {
      tip.style.display = 'none';
      return;
    }
    tip.style.display = 'block';
    tip.innerHTML =
      `<b>i=${info.i}</b> |R|=${info.setSize} fdp̂=${info.fdpHat.toFixed(3)}<br>` +
      info.perMethod
        .map((m) => `${m.label}: ${m.bound.toFixed(3)} (≥${m.trueDiscoveriesLower} true)`)
        .join('<br>');
  });
  svg.addEventListener('mousedown', (ev) => {
    dragStartRank = rankFromEvent(ev);
  });
  svg.addEventListener('mouseup', (ev) => {
    if (dragStartRank === null || !session) return;
    session.selectRange(dragStartRank, rankFromEvent(ev));
    dragStartRank = null;
    renderWorkingSet();
  });
}

function wireControls(): void {
  $('upload-btn').onclick = async () => {
    try {
      const entries = parseWInput(($('w-input') as HTMLTextAreaElement).value);
      session = await openSession(api, entries);
      const s = session.summary;
      $('summary').textContent =
        `session ${s.session}: p=${s.p}, ${s.positives} positive, ${s.dropped_zeros} zero(s) dropped`;
      clearError();
      renderWorkingSet();
      renderHistory();
      await refreshCurves();
    } catch (err) {
      handleFailure(err);
    }
  };

  $('plan-btn').onclick = async () => {
    if (!session) return;
    const family = ($('plan-family') as HTMLSelectElement).value;
    const alpha = Number(($('alpha') as HTMLInputElement).value) || 0.05;
    try {
      const res = await api.createPlan({
        session: session.id,
        name: `kji-${family}`,
        family,
        alpha,
      });
      session.registerPlan(res.name);
      $('plan-info').textContent =
        `${res.name}: v=[${res.plan.v.join(',')}] k=[${res.plan.k.join(',')}]` +
        (res.plan.certificate ? ` cert=${res.plan.certificate.prob.toFixed(4)}` : '');
      clearError();
    } catch (err) {
      handleFailure(err);
    }
  };

  $('paste-btn').onclick = () => {
    if (!session) return;
    const result = session.pasteSet(($('paste-input') as HTMLTextAreaElement).value);
    $('paste-feedback').textContent = result.rejected.length
      ? `not in session: ${result.rejected.join(', ')}`
      : '';
    renderWorkingSet();
  };

  $('range-btn').onclick = () => {
    if (!session) return;
    const from = Number(($('range-from') as HTMLInputElement).value) || 1;
    const to = Number(($('range-to') as HTMLInputElement).value) || from;
    session.selectRange(from, to);
    renderWorkingSet();
  };

  $('query-btn').onclick = async () => {
    if (!session) return;
    const method = ($('query-method') as HTMLSelectElement).value;
    const alpha = Number(($('alpha') as HTMLInputElement).value) || 0.05;
    try {
      let entry: HistoryEntry;
      if (method.startsWith('kji')) {
        const plan = planNameFor(method);
        if (!plan) throw new Error('calibrate a plan first');
        entry = await session.whatIf({ method: 'kji', plan, alpha });
      } else if (method.startsWith('kct')) {
        entry = await session.whatIfCt({ family: 'indicator', v_family: method.slice(-1).toUpperCase(), alpha });
      } else {
        entry = await session.whatIf({ method: method as 'kr' | 'js', alpha });
      }
      renderBoundPanel(entry);
      renderHistory();
      clearError();
    } catch (err) {
      handleFailure(err);
    }
  };

  $('refresh-btn').onclick = () => void refreshCurves();
}

wireControls();
