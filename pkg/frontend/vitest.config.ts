import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globals: true,
    environment: "node",
    include: ["tests/**/*.test.ts"],
    // Live-server suites create projects and drive generate/render jobs,
    // so individual tests and hooks get a generous ceiling.
    testTimeout: 120_000,
    hookTimeout: 120_000,
    // The live suites spawn one backend process each and share it across
    // their tests; keep files sequential so ports and stores never race.
    fileParallelism: false,
  },
});
