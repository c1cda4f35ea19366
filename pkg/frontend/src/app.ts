// The single-page client. One App owns a SessionState, talks to the service
// through ApiClient, and rebuilds the dynamic DOM after every change.
//
// Mutations (upload, image replacement, recolor, favorites) run through a
// promise chain so only one is in flight per document; reads ride along.

import { ApiClient, ServiceError } from "./api.js";
import type { Candidate, DocumentPayload } from "./api.js";
import {
  GROUP_ORDER,
  emptyState,
  formatProbability,
  orderSlots,
  pruneSelection,
  pushUndo,
  slotCode,
  toggleSlot,
} from "./state.js";
import type { SessionState } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

async function fileBase64(file: File): Promise<string> {
  const bytes = new Uint8Array(await file.arrayBuffer());
  let binary = "";
  for (let i = 0; i < bytes.length; i += 0x8000) {
    binary += String.fromCharCode(...bytes.subarray(i, i + 0x8000));
  }
  return btoa(binary);
}

export class App {
  readonly state: SessionState = emptyState();
  private readonly api: ApiClient;
  private readonly sampleUrl: string;
  private chain: Promise<void> = Promise.resolve();

  constructor(
    private readonly doc: Document,
    base: string = "",
  ) {
    this.api = new ApiClient(base);
    this.sampleUrl = `${base}/sample_document.json`;
    this.wire();
    this.render();
  }

  /** Resolves once every queued action so far has settled. */
  flush(): Promise<void> {
    return this.chain;
  }

  async init(): Promise<void> {
    try {
      const status = await this.api.status();
      const model = status.model as { d_model?: number; layers?: number };
      this.state.message = `service ready (d_model ${model.d_model}, ${model.layers} layers)`;
    } catch {
      this.state.message = "service unreachable";
      this.render();
      return;
    }
    const id = this.doc.defaultView?.location.hash.slice(1);
    if (id) {
      try {
        await this.adoptView(await this.api.fetchDocument(id));
        this.state.favorites = await this.api.favorites(id);
        this.state.message = `restored document ${id}`;
      } catch {
        this.state.message = "stored document expired, upload again";
      }
    }
    this.render();
  }

  // ----- actions ---------------------------------------------------------

  private enqueue(fn: () => Promise<void>): Promise<void> {
    const run = async () => {
      this.state.busy = true;
      this.render();
      try {
        await fn();
      } catch (err) {
        this.state.message =
          err instanceof ServiceError ? `${err.status}: ${err.message}` : String(err);
      } finally {
        this.state.busy = false;
        this.render();
      }
    };
    this.chain = this.chain.then(run, run);
    return this.chain;
  }

  loadSample(): Promise<void> {
    return this.enqueue(async () => {
      const res = await fetch(this.sampleUrl);
      if (!res.ok) {
        throw new Error(`sample document missing (HTTP ${res.status})`);
      }
      await this.uploadDocument(await res.json());
    });
  }

  uploadFromFile(file: File): Promise<void> {
    return this.enqueue(async () => {
      await this.uploadDocument(JSON.parse(await file.text()));
    });
  }

  private async uploadDocument(body: unknown): Promise<void> {
    const view = await this.api.upload(body);
    this.state.selected = new Set();
    this.state.recommendations = [];
    this.state.favorites = [];
    this.state.undo = [];
    await this.adoptView(view);
    const win = this.doc.defaultView;
    if (win) {
      win.location.hash = view.id;
    }
    this.state.message = `document ${view.id} uploaded`;
  }

  replaceImageFromFile(elementId: string, file: File): Promise<void> {
    return this.enqueue(async () => {
      await this.replaceImage(elementId, await fileBase64(file));
    });
  }

  private async replaceImage(elementId: string, pngBase64: string): Promise<void> {
    const view = this.requireView();
    await this.adoptView(await this.api.replaceImage(view.id, elementId, pngBase64));
    this.state.message = `image ${elementId} replaced`;
  }

  toggleSwatch(slot: string): void {
    this.state.selected = toggleSlot(this.state.selected, slot);
    this.render();
  }

  suggest(n: number): Promise<void> {
    return this.enqueue(async () => {
      const view = this.requireView();
      const slots = orderSlots(this.state.selected);
      if (slots.length === 0) {
        throw new Error("select at least one swatch first");
      }
      this.state.recommendations = await this.api.recommend(view.id, slots, n);
      this.state.message = `top ${n} for ${slots.join(", ")}`;
    });
  }

  applyCandidate(slot: string, code: string): Promise<void> {
    return this.enqueue(async () => {
      const view = this.requireView();
      const prior = slotCode(view.palettes, slot);
      if (prior !== undefined && prior !== code) {
        this.state.undo = pushUndo(this.state.undo, { slot, code: prior });
      }
      await this.adoptView(await this.api.recolor(view.id, slot, code));
      this.state.message = `applied ${code} to ${slot}`;
    });
  }

  undo(): Promise<void> {
    return this.enqueue(async () => {
      const record = this.state.undo[this.state.undo.length - 1];
      if (!record) {
        throw new Error("nothing to undo");
      }
      const view = this.requireView();
      this.state.undo = this.state.undo.slice(0, -1);
      await this.adoptView(await this.api.recolor(view.id, record.slot, record.code));
      this.state.message = `restored ${record.code} on ${record.slot}`;
    });
  }

  markFavorite(slot: string, code: string): Promise<void> {
    return this.enqueue(async () => {
      const view = this.requireView();
      this.state.favorites = await this.api.addFavorite(view.id, slot, code);
      this.state.message = `favorite saved: ${slot} ${code}`;
    });
  }

  private requireView(): DocumentPayload {
    if (!this.state.view) {
      throw new Error("no document loaded");
    }
    return this.state.view;
  }

  private async adoptView(view: DocumentPayload): Promise<void> {
    this.state.view = view;
    this.state.selected = pruneSelection(this.state.selected, view.palettes);
  }

  // ----- DOM -------------------------------------------------------------

  private byId<T extends HTMLElement>(id: string): T {
    const node = this.doc.getElementById(id);
    if (!node) {
      throw new Error(`missing #${id} in the page`);
    }
    return node as T;
  }

  private wire(): void {
    this.byId<HTMLButtonElement>("load-sample").addEventListener("click", () => {
      void this.loadSample();
    });
    this.byId<HTMLInputElement>("doc-file").addEventListener("change", (ev) => {
      const input = ev.target as HTMLInputElement;
      const file = input.files?.[0];
      if (file) {
        void this.uploadFromFile(file);
        input.value = "";
      }
    });
    this.byId<HTMLInputElement>("image-file").addEventListener("change", (ev) => {
      const input = ev.target as HTMLInputElement;
      const file = input.files?.[0];
      const elementId = this.byId<HTMLSelectElement>("image-element").value;
      if (file && elementId) {
        void this.replaceImageFromFile(elementId, file);
        input.value = "";
      }
    });
    this.byId<HTMLButtonElement>("suggest").addEventListener("click", () => {
      void this.suggest(Number(this.byId<HTMLSelectElement>("topn").value));
    });
    this.byId<HTMLButtonElement>("undo").addEventListener("click", () => {
      void this.undo();
    });
  }

  render(): void {
    const { state } = this;
    this.byId("status-line").textContent = state.busy ? `${state.message} …` : state.message;

    for (const id of ["suggest", "undo", "load-sample"]) {
      this.byId<HTMLButtonElement>(id).disabled = state.busy;
    }
    this.byId<HTMLButtonElement>("undo").disabled = state.busy || state.undo.length === 0;

    const preview = this.byId<HTMLImageElement>("preview");
    if (state.view) {
      preview.src = `data:image/png;base64,${state.view.preview}`;
      preview.hidden = false;
    } else {
      preview.hidden = true;
    }

    this.renderImagePicker();
    this.renderPalettes();
    this.renderCandidates();
    this.renderFavorites();
  }

  private renderImagePicker(): void {
    const select = this.byId<HTMLSelectElement>("image-element");
    const previous = select.value;
    select.textContent = "";
    const images =
      this.state.view?.document.elements.filter((e) => e.kind === "imageElement") ?? [];
    for (const element of images) {
      const option = this.doc.createElement("option");
      option.value = element.id;
      option.textContent = element.id;
      select.appendChild(option);
    }
    if (images.some((e) => e.id === previous)) {
      select.value = previous;
    }
    select.disabled = images.length === 0 || this.state.busy;
    this.byId<HTMLInputElement>("image-file").disabled = select.disabled;
  }

  private renderPalettes(): void {
    const host = this.byId("palettes");
    host.textContent = "";
    const view = this.state.view;
    if (!view) {
      return;
    }
    for (const group of GROUP_ORDER) {
      const strip = el(this.doc, "div", "palette-strip");
      strip.appendChild(el(this.doc, "span", "strip-label", group));
      for (const swatch of view.palettes[group]) {
        const button = el(this.doc, "button", "swatch");
        button.style.backgroundColor = swatch.hex;
        button.title = `${swatch.slot} ${swatch.code}`;
        button.dataset.slot = swatch.slot;
        if (this.state.selected.has(swatch.slot)) {
          button.classList.add("selected");
        }
        button.addEventListener("click", () => this.toggleSwatch(swatch.slot));
        strip.appendChild(button);
      }
      host.appendChild(strip);
    }
  }

  private renderCandidates(): void {
    const host = this.byId("candidates");
    host.textContent = "";
    for (const rec of this.state.recommendations) {
      const strip = el(this.doc, "div", "candidate-strip");
      strip.dataset.slot = rec.slot;
      strip.appendChild(el(this.doc, "span", "strip-label", `${rec.slot} (now ${rec.current})`));
      for (const cand of rec.candidates) {
        strip.appendChild(this.candidateCell(rec.slot, cand));
      }
      host.appendChild(strip);
    }
  }

  private candidateCell(slot: string, cand: Candidate): HTMLElement {
    const cell = el(this.doc, "div", "candidate");
    cell.dataset.slot = slot;
    cell.dataset.code = cand.code;

    const apply = el(this.doc, "button", "candidate-swatch");
    apply.style.backgroundColor = cand.hex;
    apply.title = `apply ${cand.code} to ${slot}`;
    apply.disabled = this.state.busy;
    apply.appendChild(el(this.doc, "span", "rank-badge", String(cand.rank)));
    apply.addEventListener("click", () => {
      void this.applyCandidate(slot, cand.code);
    });
    cell.appendChild(apply);

    cell.appendChild(el(this.doc, "span", "candidate-prob", formatProbability(cand.probability)));

    const star = el(this.doc, "button", "favorite-btn", "☆");
    star.title = `remember ${cand.code} for ${slot}`;
    star.disabled = this.state.busy;
    star.addEventListener("click", () => {
      void this.markFavorite(slot, cand.code);
    });
    cell.appendChild(star);
    return cell;
  }

  private renderFavorites(): void {
    const host = this.byId("favorites");
    host.textContent = "";
    for (const favorite of this.state.favorites) {
      const row = el(this.doc, "li", "favorite");
      row.textContent = `${favorite.slot} → ${favorite.code}`;
      host.appendChild(row);
    }
  }
}

export function createApp(doc: Document, base: string = ""): App {
  return new App(doc, base);
}
