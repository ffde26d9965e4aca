/** Browser entry point. */

import { boot, readApiBase } from './app.js';

const root = document.getElementById('app');
if (root) {
  boot(root, readApiBase(document)).catch((error: unknown) => {
    const message = document.createElement('div');
    message.className = 'boot-error';
    message.textContent = `failed to load run: ${error instanceof Error ? error.message : String(error)}`;
    root.appendChild(message);
  });
}
