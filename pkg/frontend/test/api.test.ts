import { afterEach, describe, expect, it, vi } from "vitest";

import { ServiceClient, ServiceError } from "../src/api.js";

function jsonResponse(doc: unknown, status = 200): Response {
  return new Response(JSON.stringify(doc), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

afterEach(() => vi.restoreAllMocks());

describe("ServiceClient", () => {
  it("uploads a field as multipart with the units query", async () => {
    const spy = vi.spyOn(globalThis, "fetch").mockResolvedValue(
      jsonResponse({ id: "f1", report: { nx: 3 } }, 201));
    const client = new ServiceClient("http://x");
    const created = await client.uploadField("0,0,1,2\n", "um");
    expect(created.id).toBe("f1");
    const [url, init] = spy.mock.calls[0];
    expect(String(url)).toBe("http://x/api/fields?units=um");
    expect((init as RequestInit).body).toBeInstanceOf(FormData);
  });

  it("surfaces engine error payloads as ServiceError", async () => {
    vi.spyOn(globalThis, "fetch").mockResolvedValue(jsonResponse(
      { error: { kind: "TipOutsideGrid", message: "nope" } }, 422));
    const client = new ServiceClient("http://x");
    await expect(client.putCrack("f1", { tip: [9, 9] }))
      .rejects.toMatchObject({ status: 422, kind: "TipOutsideGrid" });
  });

  it("polls a job until it settles", async () => {
    const states = ["queued", "running", "done"];
    let call = 0;
    vi.spyOn(globalThis, "fetch").mockImplementation(async () =>
      jsonResponse({ id: "j1", field_id: "f1", kind: "analysis",
                     status: states[Math.min(call++, 2)],
                     result: null, error: null }));
    const client = new ServiceClient("http://x");
    const job = await client.pollJob("j1", 1);
    expect(job.status).toBe("done");
    expect(call).toBe(3);
  });

  it("times out a job that never settles", async () => {
    vi.spyOn(globalThis, "fetch").mockImplementation(async () =>
      jsonResponse({ id: "j1", field_id: "f1", kind: "analysis",
                     status: "running", result: null, error: null }));
    const client = new ServiceClient("http://x");
    await expect(client.pollJob("j1", 1, 15)).rejects.toBeInstanceOf(ServiceError);
  });
});
