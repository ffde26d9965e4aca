import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    globals: true,
    environment: 'jsdom',
    include: ['tests/**/*.spec.ts'],
    // The integration suite boots a real API server; give setup room.
    hookTimeout: 120_000,
    testTimeout: 30_000,
  },
});
