import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // The e2e suite boots the real backend (synth + uvicorn) once per run.
    testTimeout: 30000,
    hookTimeout: 30000,
  },
});
