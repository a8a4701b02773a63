import asyncio


async def fetch(client, url):
    """Fetch a URL."""
    await asyncio.sleep(0)
    return client.get(url)
