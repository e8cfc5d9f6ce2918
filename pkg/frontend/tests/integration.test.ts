/** Contract tests against a live annotation service on a synthetic sequence:
 * point round-trips, trace-click seeking, pause-at-annotated playback, and
 * the guess-confirm flow all exercise the real HTTP surface. */

import { beforeAll, describe, expect, inject, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { Controller } from "../src/controller.js";
import { frameFromTraceX, frameToX } from "../src/traces.js";

const WORK_LAYER = "work";
let api: ApiClient;

beforeAll(async () => {
  api = new ApiClient(inject("baseUrl"));
  const layers = await api.layers();
  if (!layers.layers.some((l) => l.name === WORK_LAYER)) {
    await api.createLayer(WORK_LAYER);
  }
});

async function freshController(): Promise<Controller> {
  const c = new Controller(api);
  await c.init();
  c.state = { ...c.state, primaryLayer: WORK_LAYER };
  await c.refresh();
  return c;
}

describe("server contract", () => {
  it("serves meta for the synthetic session", async () => {
    const meta = await api.meta();
    expect(meta.frames).toBe(60);
    expect(meta.fps).toBe(50);
    expect(meta.width).toBe(48);
  });

  it("PUT then GET returns identical coordinates", async () => {
    const put = await api.putPoint(WORK_LAYER, "0", 7, 12.25, 30.5);
    expect(put.revision).toBeGreaterThan(0);
    const traj = await api.getLabel(WORK_LAYER, "0");
    expect(traj.points["7"]).toEqual([12.25, 30.5]);
    expect(traj.revision).toBe(put.revision);
  });

  it("serves PNG frames", async () => {
    const res = await fetch(api.frameUrl(0));
    expect(res.status).toBe(200);
    expect(res.headers.get("content-type")).toBe("image/png");
    const bytes = new Uint8Array(await res.arrayBuffer());
    expect(Array.from(bytes.slice(1, 4))).toEqual([0x50, 0x4e, 0x47]); // "PNG"
  });

  it("maps stale revisions to conflicts", async () => {
    const r1 = await api.putPoint(WORK_LAYER, "1", 3, 10, 10);
    await api.putPoint(WORK_LAYER, "1", 3, 11, 11, r1.revision);
    await expect(api.putPoint(WORK_LAYER, "1", 3, 12, 12, r1.revision)).rejects.toMatchObject({
      status: 409,
    });
  });
});

describe("trace click seeking", () => {
  it("seeks to the frame mapped from the clicked pixel", async () => {
    const c = await freshController();
    const width = 960;
    for (const frame of [0, 13, 42, 59]) {
      const px = frameToX(frame, c.nFrames, width);
      const landed = c.seekFromTraceClick(px, width);
      expect(landed).toBe(frame);
      expect(c.state.frame).toBe(frame);
    }
  });

  it("agrees with the pure mapping at arbitrary pixels", async () => {
    const c = await freshController();
    for (const px of [0, 119.5, 500, 959]) {
      const landed = c.seekFromTraceClick(px, 960);
      expect(landed).toBe(frameFromTraceX(px, 960, c.nFrames));
    }
  });
});

describe("pause-at-annotated playback", () => {
  it("halts at the next annotated frame reported by the server", async () => {
    await api.putPoint(WORK_LAYER, "0", 25, 20, 20);
    await api.putPoint(WORK_LAYER, "0", 40, 21, 21);
    const c = await freshController();
    expect(c.annotated).toContain(25);
    expect(c.annotated).toContain(40);

    c.seekFromTraceClick(frameToX(10, c.nFrames, 960), 960);
    await c.handleKey("a"); // pause-at-annotated on
    await c.handleKey(" "); // play
    expect(c.state.playing).toBe(true);
    let guard = 0;
    while (c.tick() && guard++ < 1000) {
      /* advance playback */
    }
    expect(c.state.frame).toBe(25);
    expect(c.state.playing).toBe(false);

    await c.handleKey(" ");
    guard = 0;
    while (c.tick() && guard++ < 1000) {
      /* advance to the next annotated frame */
    }
    expect(c.state.frame).toBe(40);
  });
});

describe("guess-confirm flow", () => {
  it("produces a server-visible point only after confirmation", async () => {
    // seed one annotation; the static-ish texture lets flow track from it
    await api.putPoint(WORK_LAYER, "1", 30, 24.0, 24.0);
    const c = await freshController();
    c.state = { ...c.state, label: "1" };
    c.seekFromTraceClick(frameToX(33, c.nFrames, 960), 960);
    expect(c.state.frame).toBe(33);

    await c.handleKey("g");
    expect(c.state.pendingGuess).not.toBeNull();
    expect(c.state.pendingGuess?.frame).toBe(33);

    // provisional only: the server must not have the point yet
    let traj = await api.getLabel(WORK_LAYER, "1");
    expect(traj.points["33"]).toBeUndefined();

    await c.handleKey("Enter");
    expect(c.state.pendingGuess).toBeNull();
    traj = await api.getLabel(WORK_LAYER, "1");
    expect(traj.points["33"]).toBeDefined();
    const [gx, gy] = traj.points["33"];
    // translation is 0.2 px/frame; three frames from the anchor
    expect(Math.abs(gx - 24.6)).toBeLessThan(0.5);
    expect(Math.abs(gy - 24.0)).toBeLessThan(0.5);
  });

  it("escape discards the provisional marker without a write", async () => {
    const c = await freshController();
    c.state = { ...c.state, label: "1" };
    c.seekFromTraceClick(frameToX(35, c.nFrames, 960), 960);
    await c.handleKey("g");
    expect(c.state.pendingGuess).not.toBeNull();
    await c.handleKey("Escape");
    expect(c.state.pendingGuess).toBeNull();
    const traj = await api.getLabel(WORK_LAYER, "1");
    expect(traj.points["35"]).toBeUndefined();
  });
});

describe("video click annotation", () => {
  it("optimistically places and persists a point", async () => {
    const c = await freshController();
    c.state = { ...c.state, label: "0" };
    c.seekFromTraceClick(frameToX(50, c.nFrames, 960), 960);
    const ok = await c.clickVideo(18.5, 22.25);
    expect(ok).toBe(true);
    const traj = await api.getLabel(WORK_LAYER, "0");
    expect(traj.points["50"]).toEqual([18.5, 22.25]);
  });

  it("rolls back on validation failure", async () => {
    const c = await freshController();
    c.state = { ...c.state, label: "0" };
    c.seekFromTraceClick(frameToX(51, c.nFrames, 960), 960);
    const ok = await c.clickVideo(4700.0, 22.25); // outside the frame
    expect(ok).toBe(false);
    expect(c.primaryData.get("0")?.points["51"]).toBeUndefined();
    const traj = await api.getLabel(WORK_LAYER, "0");
    expect(traj.points["51"]).toBeUndefined();
  });
});
