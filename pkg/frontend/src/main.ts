import { AnnotateView, ViewChrome } from "./annotate_view.js";
import { Api } from "./api.js";
import { GcpView } from "./gcp_view.js";
import { OverlayView } from "./overlay_view.js";

type TabName = "annotate" | "gcps" | "overlay";

interface TabView {
  onKey(ev: KeyboardEvent): boolean;
  invalidate(): void;
}

/**
 * Bootstrap: fetch the project descriptor, build the three tab views, and
 * route tabs + keyboard. Everything shown is reconstructed from the API on
 * load, so a refresh is always safe.
 */
async function boot(): Promise<void> {
  const api = new Api();
  const [info, images] = await Promise.all([api.project(), api.images()]);

  document.getElementById("project-label")!.textContent =
    `${info.image_count} image(s) · ${info.categories.join(", ")}`;

  const statusMsg = document.getElementById("status-msg")!;
  const statusPos = document.getElementById("status-pos")!;
  const banner = document.getElementById("banner")!;
  const bannerText = document.getElementById("banner-text")!;
  const bannerReload = document.getElementById("banner-reload") as
    HTMLButtonElement;
  let bannerAction: (() => void) | null = null;

  const chrome: ViewChrome = {
    setStatus: (msg) => {
      statusMsg.textContent = msg;
    },
    setCursorPos: (msg) => {
      statusPos.textContent = msg;
    },
    showBanner: (text, onReload) => {
      bannerText.textContent = text;
      bannerAction = onReload;
      bannerReload.hidden = onReload === null;
      banner.hidden = false;
    },
  };
  bannerReload.addEventListener("click", () => {
    banner.hidden = true;
    bannerAction?.();
  });
  document.getElementById("banner-dismiss")!
    .addEventListener("click", () => {
      banner.hidden = true;
    });

  const annotate = new AnnotateView(api, info, chrome);
  const gcps = new GcpView(api, chrome);
  const overlay = new OverlayView(api, chrome);
  annotate.setImages(images);
  gcps.setImages(images);
  overlay.setImages(images);

  const views: Record<TabName, TabView> = { annotate, gcps, overlay };
  let active: TabName = "annotate";

  const tabButtons = Array.from(
    document.querySelectorAll<HTMLButtonElement>("#tabs button"));
  const disabledWhy: Partial<Record<TabName, string>> = {};
  if (!info.gcps_configured) {
    disabledWhy.gcps = "no GCP table configured (serve.gcps)";
  }
  if (!info.preview_configured) {
    disabledWhy.overlay =
      "projection inputs not configured (serve.reconstruction/dsm/ortho_world)";
  }

  function switchTab(tab: TabName): void {
    active = tab;
    for (const btn of tabButtons) {
      btn.classList.toggle("active", btn.dataset.tab === tab);
    }
    for (const name of ["annotate", "gcps", "overlay"] as const) {
      document.getElementById(`view-${name}`)!.hidden = name !== tab;
    }
    views[tab].invalidate();
  }

  for (const btn of tabButtons) {
    const tab = btn.dataset.tab as TabName;
    const why = disabledWhy[tab];
    if (why) {
      btn.disabled = true;
      btn.title = why;
    } else {
      btn.addEventListener("click", () => switchTab(tab));
    }
  }

  window.addEventListener("keydown", (ev) => {
    const target = ev.target as HTMLElement | null;
    if (target && ("value" in target || target.isContentEditable)) return;
    if (ev.key === " ") {
      annotate.spaceDown = true;
      gcps.spaceDown = true;
      ev.preventDefault();
      return;
    }
    if (views[active].onKey(ev)) ev.preventDefault();
  });
  window.addEventListener("keyup", (ev) => {
    if (ev.key === " ") {
      annotate.spaceDown = false;
      gcps.spaceDown = false;
    }
  });

  if (!info.gcps_configured) {
    (document.getElementById("gcp-export") as HTMLButtonElement)
      .disabled = true;
  } else {
    await gcps.load();
  }

  const first = images[0];
  if (first) await annotate.open(first);
  chrome.setStatus(`project loaded — ${info.image_count} image(s)`);
}

boot().catch((err) => {
  const msg = document.getElementById("status-msg");
  if (msg) msg.textContent = `startup failed: ${String(err)}`;
  console.error(err);
});
