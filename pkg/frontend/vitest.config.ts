import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'node',
    include: ['tests/**/*.test.ts'],
    // the round-trip suite boots the Python service and calibrates a plan
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
