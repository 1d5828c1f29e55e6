import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // the end-to-end test boots the real backend and flies whole sessions
    testTimeout: 120_000,
    hookTimeout: 60_000,
  },
});
