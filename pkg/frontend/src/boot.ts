// Browser entry point: mounts the app on #app against the service base URL
// from ?api=... (default: same-host port 8765).

import { TradingApp } from './main.js';

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get('api') ?? `http://${window.location.hostname || '127.0.0.1'}:8765`;
const root = document.getElementById('app');
if (root === null) throw new Error('missing #app mount point');
const app = new TradingApp(root, baseUrl);
void app.start();
