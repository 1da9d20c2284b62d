import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    // the end-to-end test spawns a real review service subprocess
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
