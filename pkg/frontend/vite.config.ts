import { defineConfig } from "vitest/config";

export default defineConfig({
  server: {
    proxy: {
      "/v1": "http://127.0.0.1:8442",
    },
  },
  test: {
    environment: "jsdom",
  },
});
