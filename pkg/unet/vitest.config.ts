import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // training tests run a couple hundred optimizer steps on the JS backend
    testTimeout: 240_000,
    hookTimeout: 120_000,
  },
});
